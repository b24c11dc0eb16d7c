//! Coordinate featurizations for the ReLU baselines.
//!
//! Both encodings keep the raw coordinates and append `[sin(w·x), cos(w·x)]`
//! pairs. Positional encoding uses axis-aligned frequencies `base·2^k`; Fourier
//! features draw `w = 2π·scale·g` with `g` standard normal under a fixed seed.

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{check_finite, Matrix};

pub const DEFAULT_PE_LEVELS: usize = 10;
pub const DEFAULT_PE_BASE: f64 = PI;
pub const DEFAULT_FF_COUNT: usize = 20;
pub const DEFAULT_FF_SCALE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum EncodingSpec {
    #[default]
    None,
    PositionalEncoding { levels: usize, base_omega: f64 },
    FourierFeatures { count: usize, scale: f64, seed: u64 },
}

impl EncodingSpec {
    pub fn positional() -> Self {
        EncodingSpec::PositionalEncoding {
            levels: DEFAULT_PE_LEVELS,
            base_omega: DEFAULT_PE_BASE,
        }
    }

    pub fn fourier_features(seed: u64) -> Self {
        EncodingSpec::FourierFeatures {
            count: DEFAULT_FF_COUNT,
            scale: DEFAULT_FF_SCALE,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EncodingSpec::None => Ok(()),
            EncodingSpec::PositionalEncoding { levels, base_omega } => {
                if levels == 0 {
                    return Err(Error::InvalidArgument(
                        "positional encoding needs at least one level".into(),
                    ));
                }
                if !base_omega.is_finite() {
                    return Err(Error::InvalidArgument("base_omega must be finite".into()));
                }
                Ok(())
            }
            EncodingSpec::FourierFeatures { count, scale, .. } => {
                if count == 0 || !scale.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "invalid Fourier features: count={count} scale={scale}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Width of the encoded matrix for `in_dim` raw coordinates.
    pub fn output_dim(&self, in_dim: usize) -> usize {
        match *self {
            EncodingSpec::None => in_dim,
            EncodingSpec::PositionalEncoding { levels, .. } => in_dim * (1 + 2 * levels),
            EncodingSpec::FourierFeatures { count, .. } => in_dim + 2 * count,
        }
    }
}

/// An encoding materialized for a fixed input width.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    in_dim: usize,
    /// Angular frequency vectors, `in_dim` entries each, one per sin/cos pair.
    frequencies: Vec<Vec<f64>>,
}

impl Encoder {
    pub fn new(spec: &EncodingSpec, in_dim: usize) -> Result<Self> {
        spec.validate()?;
        let frequencies = match *spec {
            EncodingSpec::None => Vec::new(),
            EncodingSpec::PositionalEncoding { levels, base_omega } => {
                let mut out = Vec::with_capacity(in_dim * levels);
                for d in 0..in_dim {
                    for k in 0..levels {
                        let mut w = vec![0.0; in_dim];
                        w[d] = base_omega * 2f64.powi(k as i32);
                        out.push(w);
                    }
                }
                out
            }
            EncodingSpec::FourierFeatures { count, scale, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..count)
                    .map(|_| {
                        (0..in_dim)
                            .map(|_| {
                                let g: f64 = StandardNormal.sample(&mut rng);
                                TAU * scale * g
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        Ok(Self {
            in_dim,
            frequencies,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.in_dim + 2 * self.frequencies.len()
    }

    pub fn is_identity(&self) -> bool {
        self.frequencies.is_empty()
    }

    fn phase(w: &[f64], x: &[f64]) -> f64 {
        w.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn encode(&self, coords: &Matrix) -> Result<Matrix> {
        if coords.cols() != self.in_dim {
            return Err(Error::Shape {
                op: "encode",
                left: coords.shape(),
                right: (coords.rows(), self.in_dim),
            });
        }
        check_finite(coords.data(), "encode input")?;
        if self.is_identity() {
            return Ok(coords.clone());
        }
        let width = self.out_dim();
        let mut out = Vec::with_capacity(coords.rows() * width);
        for r in 0..coords.rows() {
            let x = coords.row(r);
            out.extend_from_slice(x);
            for w in &self.frequencies {
                let (s, c) = Self::phase(w, x).sin_cos();
                out.push(s);
                out.push(c);
            }
        }
        Ok(Matrix::from_raw(coords.rows(), width, out))
    }

    /// Chains a gradient w.r.t. the encoded features back to the raw coordinates.
    pub fn backprop(&self, coords: &Matrix, d_encoded: &Matrix) -> Result<Matrix> {
        if d_encoded.cols() != self.out_dim() || d_encoded.rows() != coords.rows() {
            return Err(Error::Shape {
                op: "encoding backprop",
                left: d_encoded.shape(),
                right: (coords.rows(), self.out_dim()),
            });
        }
        let mut out = Vec::with_capacity(coords.rows() * self.in_dim);
        for r in 0..coords.rows() {
            let x = coords.row(r);
            let g = d_encoded.row(r);
            let mut dx = g[..self.in_dim].to_vec();
            for (p, w) in self.frequencies.iter().enumerate() {
                let (s, c) = Self::phase(w, x).sin_cos();
                let ds = g[self.in_dim + 2 * p];
                let dc = g[self.in_dim + 2 * p + 1];
                let scale = ds * c - dc * s;
                for (d, wi) in dx.iter_mut().zip(w) {
                    *d += scale * wi;
                }
            }
            out.extend(dx);
        }
        Matrix::new(coords.rows(), self.in_dim, out)
    }
}

/// One-shot encoding; build an [`Encoder`] to reuse frequencies across calls.
pub fn encode(spec: &EncodingSpec, coords: &Matrix) -> Result<Matrix> {
    Encoder::new(spec, coords.cols())?.encode(coords)
}
