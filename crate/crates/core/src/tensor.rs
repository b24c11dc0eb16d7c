//! Dense row-major `f64` matrices.
//!
//! Rows are batch samples and columns are features, so a dense layer is
//! `(batch × fan_in) · (fan_in × fan_out)`. The GEMM kernel is delegated to
//! `matrixmultiply`; every public constructor and operation rejects NaN/Inf.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidShape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        check_finite(&data, "Matrix::new")?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from `f(row, col)`. Panics if `f` yields a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = f(r, c);
                assert!(v.is_finite(), "Matrix::from_fn produced {v} at ({r}, {c})");
                data.push(v);
            }
        }
        Self { rows, cols, data }
    }

    /// A single-row matrix.
    pub fn row_vector(values: &[f64]) -> Result<Self> {
        Self::new(1, values.len(), values.to_vec())
    }

    /// A single-column matrix.
    pub fn column_vector(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Mutable access for crate internals that maintain finiteness themselves.
    #[inline]
    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Wraps a buffer without the finiteness scan; callers guarantee the invariant.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// `self · b`.
    pub fn matmul(&self, b: &Matrix) -> Result<Matrix> {
        if self.cols != b.rows {
            return Err(self.shape_error("matmul", b));
        }
        let (m, k, n) = (self.rows, self.cols, b.cols);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &self.data, (k, 1), &b.data, (n, 1), &mut out);
        check_finite(&out, "matmul")?;
        Ok(Self::from_raw(m, n, out))
    }

    /// `selfᵀ · b` without materializing the transpose.
    pub fn matmul_transpose_left(&self, b: &Matrix) -> Result<Matrix> {
        if self.rows != b.rows {
            return Err(self.shape_error("matmul_transpose_left", b));
        }
        let (m, k, n) = (self.cols, self.rows, b.cols);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &self.data, (1, self.cols), &b.data, (n, 1), &mut out);
        check_finite(&out, "matmul_transpose_left")?;
        Ok(Self::from_raw(m, n, out))
    }

    /// `self · bᵀ` without materializing the transpose.
    pub fn matmul_transpose_right(&self, b: &Matrix) -> Result<Matrix> {
        if self.cols != b.cols {
            return Err(self.shape_error("matmul_transpose_right", b));
        }
        let (m, k, n) = (self.rows, self.cols, b.rows);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &self.data, (k, 1), &b.data, (1, b.cols), &mut out);
        check_finite(&out, "matmul_transpose_right")?;
        Ok(Self::from_raw(m, n, out))
    }

    pub fn map_elementwise(&self, f: impl Fn(f64) -> f64) -> Result<Matrix> {
        let mut out = Vec::with_capacity(self.data.len());
        for (i, &x) in self.data.iter().enumerate() {
            let y = f(x);
            if !y.is_finite() {
                return Err(Error::NonFinite {
                    context: "map_elementwise".into(),
                    index: i,
                });
            }
            out.push(y);
        }
        Ok(Self::from_raw(self.rows, self.cols, out))
    }

    pub fn add_row_broadcast(&self, bias: &[f64]) -> Result<Matrix> {
        if bias.len() != self.cols {
            return Err(Error::Shape {
                op: "add_row_broadcast",
                left: self.shape(),
                right: (1, bias.len()),
            });
        }
        let mut out = self.clone();
        out.add_row_broadcast_in_place(bias);
        check_finite(&out.data, "add_row_broadcast")?;
        Ok(out)
    }

    pub(crate) fn add_row_broadcast_in_place(&mut self, bias: &[f64]) {
        for row in self.data.chunks_exact_mut(self.cols.max(1)) {
            for (v, b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
    }

    /// Sum over rows, one entry per column.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols.max(1)) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn shape_error(&self, op: &'static str, other: &Matrix) -> Error {
        Error::Shape {
            op,
            left: self.shape(),
            right: other.shape(),
        }
    }
}

pub(crate) fn check_finite(data: &[f64], context: &str) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            context: context.to_string(),
            index,
        }),
        None => Ok(()),
    }
}

/// `c = a · b` with explicit (row, col) strides for `a` and `b`; `c` is dense row-major.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    assert!(a.len() >= (m - 1) * a_strides.0 + (k - 1) * a_strides.1 + 1);
    assert!(b.len() >= (k - 1) * b_strides.0 + (n - 1) * b_strides.1 + 1);
    assert_eq!(c.len(), m * n);
    // SAFETY: the assertions above bound every strided access inside the
    // slices, and `c` is an exclusively borrowed dense m×n buffer.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
