//! Coordinate grids, ground-truth signals and the resampling used by the
//! super-resolution and interpolation protocols.
//!
//! Grids are align-corners: each axis is a linspace that includes both bounds,
//! and samples are flattened row-major (last axis fastest).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{check_finite, Matrix};

pub const UNIT_BOUNDS: (f64, f64) = (-1.0, 1.0);
pub const AUDIO_BOUNDS: (f64, f64) = (-100.0, 100.0);

/// `n` points from `lo` to `hi` inclusive. A single point sits at the midpoint.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                lo * (1.0 - t) + hi * t
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordGrid {
    shape: Vec<usize>,
    bounds: Vec<(f64, f64)>,
    coords: Matrix,
}

impl CoordGrid {
    pub fn dims(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.coords.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.rows() == 0
    }

    /// `(∏shape) × dims` matrix of coordinates.
    pub fn coords(&self) -> &Matrix {
        &self.coords
    }

    pub fn axis(&self, dim: usize) -> Vec<f64> {
        let (lo, hi) = self.bounds[dim];
        linspace(lo, hi, self.shape[dim])
    }

    /// The coordinates that [`downsample_1d`] keeps, taken verbatim from this grid.
    pub fn decimate(&self, factor: usize) -> Result<CoordGrid> {
        if self.dims() != 1 {
            return Err(Error::Unsupported("decimate needs a 1D grid".into()));
        }
        if factor == 0 {
            return Err(Error::InvalidArgument("decimation factor must be positive".into()));
        }
        let n = self.len() / factor;
        if n == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid of {} points is shorter than factor {factor}",
                self.len()
            )));
        }
        let kept: Vec<f64> = self.coords.data().iter().step_by(factor).take(n).copied().collect();
        let bounds = (kept[0], kept[n - 1]);
        Ok(CoordGrid {
            shape: vec![n],
            bounds: vec![bounds],
            coords: Matrix::new(n, 1, kept)?,
        })
    }
}

pub fn make_grid(shape: &[usize], bounds: &[(f64, f64)]) -> Result<CoordGrid> {
    if shape.is_empty() || shape.len() != bounds.len() {
        return Err(Error::InvalidShape(format!(
            "grid shape {shape:?} needs one bound pair per dimension, got {}",
            bounds.len()
        )));
    }
    if shape.contains(&0) {
        return Err(Error::InvalidShape(format!("zero-size grid dimension in {shape:?}")));
    }
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!("bad grid bounds ({lo}, {hi})")));
        }
    }
    let axes: Vec<Vec<f64>> = shape
        .iter()
        .zip(bounds)
        .map(|(&n, &(lo, hi))| linspace(lo, hi, n))
        .collect();
    let dims = shape.len();
    let count: usize = shape.iter().product();
    let mut data = Vec::with_capacity(count * dims);
    let mut index = vec![0usize; dims];
    for _ in 0..count {
        data.extend(index.iter().zip(&axes).map(|(&i, axis)| axis[i]));
        for d in (0..dims).rev() {
            index[d] += 1;
            if index[d] < shape[d] {
                break;
            }
            index[d] = 0;
        }
    }
    Ok(CoordGrid {
        shape: shape.to_vec(),
        bounds: bounds.to_vec(),
        coords: Matrix::new(count, dims, data)?,
    })
}

/// A grid with the same bounds on every axis.
pub fn uniform_grid(shape: &[usize], bounds: (f64, f64)) -> Result<CoordGrid> {
    make_grid(shape, &vec![bounds; shape.len()])
}

/// Single-channel samples on a grid, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    shape: Vec<usize>,
    values: Vec<f64>,
    source_bit_depth: Option<u8>,
}

impl Signal {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.is_empty() || expected != values.len() {
            return Err(Error::InvalidShape(format!(
                "signal shape {shape:?} holds {expected} values, got {}",
                values.len()
            )));
        }
        check_finite(&values, "signal")?;
        Ok(Self {
            shape,
            values,
            source_bit_depth: None,
        })
    }

    pub fn with_bit_depth(mut self, bits: u8) -> Self {
        self.source_bit_depth = Some(bits);
        self
    }

    /// Reshapes a `n × 1` network output.
    pub fn from_column(shape: Vec<usize>, column: &Matrix) -> Result<Self> {
        if column.cols() != 1 {
            return Err(Error::Unsupported(format!(
                "signals are single-channel, got {} columns",
                column.cols()
            )));
        }
        Self::new(shape, column.data().to_vec())
    }

    pub fn dims(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn source_bit_depth(&self) -> Option<u8> {
        self.source_bit_depth
    }

    pub fn to_column(&self) -> Matrix {
        Matrix::from_raw(self.values.len(), 1, self.values.clone())
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn in_unit_range(&self) -> bool {
        self.values.iter().all(|v| (-1.0..=1.0).contains(v))
    }
}

/// `y = 2p/255 − 1`.
pub fn normalize_u8(pixels: &[u8], shape: Vec<usize>) -> Result<Signal> {
    let values = pixels.iter().map(|&p| 2.0 * p as f64 / 255.0 - 1.0).collect();
    Ok(Signal::new(shape, values)?.with_bit_depth(8))
}

fn to_byte(v: f64) -> u8 {
    v.round_ties_even().clamp(0.0, 255.0) as u8
}

/// Back to 0–255. In-range signals use the affine inverse `(y+1)·255/2`; a
/// signal that leaves `[-1, 1]` is min-max stretched onto the byte range.
pub fn denormalize_u8(signal: &Signal) -> Vec<u8> {
    if signal.in_unit_range() {
        return signal
            .values
            .iter()
            .map(|&y| to_byte((y + 1.0) * 255.0 / 2.0))
            .collect();
    }
    let (lo, hi) = signal.min_max();
    signal
        .values
        .iter()
        .map(|&y| to_byte((y - lo) * 255.0 / (hi - lo)))
        .collect()
}

/// Bilinear resampling of a 2D signal on align-corners grids.
pub fn bilinear_resize(signal: &Signal, new_shape: (usize, usize)) -> Result<Signal> {
    let [rows, cols] = signal.shape[..] else {
        return Err(Error::Unsupported(format!(
            "bilinear_resize needs a 2D signal, got shape {:?}",
            signal.shape
        )));
    };
    let (new_rows, new_cols) = new_shape;
    if new_rows == 0 || new_cols == 0 {
        return Err(Error::InvalidShape(format!("resize target {new_shape:?}")));
    }
    let src = |n: usize, m: usize| -> Vec<(usize, usize, f64)> {
        (0..m)
            .map(|i| {
                if n == 1 {
                    return (0, 0, 0.0);
                }
                let pos = if m == 1 {
                    (n - 1) as f64 / 2.0
                } else {
                    i as f64 * (n - 1) as f64 / (m - 1) as f64
                };
                let lo = (pos.floor() as usize).min(n - 2);
                (lo, lo + 1, pos - lo as f64)
            })
            .collect()
    };
    let row_taps = src(rows, new_rows);
    let col_taps = src(cols, new_cols);
    let v = &signal.values;
    let mut out = Vec::with_capacity(new_rows * new_cols);
    for &(r0, r1, fr) in &row_taps {
        for &(c0, c1, fc) in &col_taps {
            let top = v[r0 * cols + c0] * (1.0 - fc) + v[r0 * cols + c1] * fc;
            let bottom = v[r1 * cols + c0] * (1.0 - fc) + v[r1 * cols + c1] * fc;
            out.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    let mut resized = Signal::new(vec![new_rows, new_cols], out)?;
    resized.source_bit_depth = signal.source_bit_depth;
    Ok(resized)
}

/// Keeps every `factor`-th sample starting at index 0. A trailing partial
/// stride is dropped, so the output has `len / factor` samples.
pub fn downsample_1d(signal: &Signal, factor: usize) -> Result<Signal> {
    if factor == 0 {
        return Err(Error::InvalidArgument("downsample factor must be positive".into()));
    }
    if signal.dims() != 1 {
        return Err(Error::Unsupported(format!(
            "downsample_1d needs a 1D signal, got shape {:?}",
            signal.shape
        )));
    }
    let n = signal.len() / factor;
    if n == 0 {
        return Err(Error::InvalidArgument(format!(
            "signal of {} samples is shorter than factor {factor}",
            signal.len()
        )));
    }
    let values: Vec<f64> = signal.values.iter().step_by(factor).take(n).copied().collect();
    let mut out = Signal::new(vec![n], values)?;
    out.source_bit_depth = signal.source_bit_depth;
    Ok(out)
}
