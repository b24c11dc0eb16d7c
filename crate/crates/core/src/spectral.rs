//! Discrete Fourier transforms, amplitude spectra and spectral similarity.
//!
//! `fft_1d` is unnormalized, `X_n = Σ_k s_k e^{−i2πnk/N}`. `fft_2d` carries the
//! `1/(MN)` factor, `F(u,v) = (1/MN) Σ_x Σ_y f(x,y) e^{−i2π(ux/M + vy/N)}`.
//! Power-of-two lengths go through an iterative radix-2 kernel; other lengths
//! use a direct DFT below [`BLUESTEIN_THRESHOLD`] and Bluestein's chirp-z
//! convolution above it.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const BLUESTEIN_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub shape: Vec<usize>,
    pub values: Vec<Complex64>,
}

/// Non-negative magnitudes with the zero-frequency bin set to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSpectrum {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

fn bit_reverse_permute(buf: &mut [Complex64]) {
    let n = buf.len();
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
}

/// In-place radix-2 transform; `buf.len()` must be a power of two.
fn radix2(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    bit_reverse_permute(buf);
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let twiddles: Vec<Complex64> = (0..half)
            .map(|k| Complex64::from_polar(1.0, sign * TAU * k as f64 / len as f64))
            .collect();
        for chunk in buf.chunks_exact_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(&twiddles) {
                let t = *b * w;
                *b = *a - t;
                *a += t;
            }
        }
        len <<= 1;
    }
}

fn naive(input: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = input.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    let roots: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, sign * TAU * k as f64 / n as f64))
        .collect();
    (0..n)
        .map(|f| {
            input
                .iter()
                .enumerate()
                .map(|(k, &s)| s * roots[(f * k) % n])
                .sum()
        })
        .collect()
}

pub(crate) fn bluestein(input: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = input.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    // k² mod 2N keeps the chirp phase exact for large k.
    let chirp: Vec<Complex64> = (0..n)
        .map(|k| {
            let k2 = (k as u128 * k as u128 % (2 * n as u128)) as f64;
            Complex64::from_polar(1.0, sign * PI * k2 / n as f64)
        })
        .collect();
    let m = (2 * n - 1).next_power_of_two();
    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for (k, (&x, &c)) in input.iter().zip(&chirp).enumerate() {
        a[k] = x * c;
    }
    let mut b = vec![Complex64::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        b[k] = chirp[k].conj();
        b[m - k] = chirp[k].conj();
    }
    radix2(&mut a, false);
    radix2(&mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    radix2(&mut a, true);
    let scale = 1.0 / m as f64;
    (0..n).map(|k| a[k] * scale * chirp[k]).collect()
}

/// Unnormalized complex DFT (`inverse` flips the exponent sign only).
pub fn dft_complex(input: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = input.len();
    if n <= 1 {
        return input.to_vec();
    }
    if n.is_power_of_two() {
        let mut buf = input.to_vec();
        radix2(&mut buf, inverse);
        buf
    } else if n < BLUESTEIN_THRESHOLD {
        naive(input, inverse)
    } else {
        bluestein(input, inverse)
    }
}

pub fn fft_1d(values: &[f64]) -> ComplexSpectrum {
    let input: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    ComplexSpectrum {
        shape: vec![values.len()],
        values: dft_complex(&input, false),
    }
}

/// Inverse of [`fft_1d`], including the `1/N` factor.
pub fn ifft_1d(spectrum: &ComplexSpectrum) -> Vec<Complex64> {
    let n = spectrum.values.len();
    let scale = 1.0 / n.max(1) as f64;
    dft_complex(&spectrum.values, true)
        .into_iter()
        .map(|v| v * scale)
        .collect()
}

fn transform_2d(data: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    for r in 0..rows {
        let row = dft_complex(&data[r * cols..(r + 1) * cols], inverse);
        data[r * cols..(r + 1) * cols].copy_from_slice(&row);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        let out = dft_complex(&column, inverse);
        for r in 0..rows {
            data[r * cols + c] = out[r];
        }
    }
}

/// Row-major `rows × cols` transform with the `1/(rows·cols)` factor.
pub fn fft_2d(values: &[f64], rows: usize, cols: usize) -> Result<ComplexSpectrum> {
    if values.len() != rows * cols {
        return Err(Error::InvalidShape(format!(
            "fft_2d: {} values for {rows}x{cols}",
            values.len()
        )));
    }
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_2d(&mut data, rows, cols, false);
    let scale = 1.0 / (rows * cols).max(1) as f64;
    data.iter_mut().for_each(|v| *v *= scale);
    Ok(ComplexSpectrum {
        shape: vec![rows, cols],
        values: data,
    })
}

/// Inverse of [`fft_2d`].
pub fn ifft_2d(spectrum: &ComplexSpectrum) -> Result<Vec<Complex64>> {
    let [rows, cols] = spectrum.shape[..] else {
        return Err(Error::Unsupported("ifft_2d needs a 2D spectrum".into()));
    };
    let mut data = spectrum.values.clone();
    transform_2d(&mut data, rows, cols, true);
    Ok(data)
}

/// Zero-centered amplitude spectrum of a 1D or 2D real signal.
///
/// 1D magnitudes are scaled by `2/N`; 2D magnitudes use the `1/(MN)`
/// normalization of [`fft_2d`]. The DC bin is zeroed, not removed.
pub fn amplitude_spectrum(values: &[f64], shape: &[usize]) -> Result<AmplitudeSpectrum> {
    let expected: usize = shape.iter().product();
    if expected != values.len() {
        return Err(Error::InvalidShape(format!(
            "amplitude_spectrum: shape {shape:?} vs {} values",
            values.len()
        )));
    }
    let mut mags: Vec<f64> = match *shape {
        [n] => {
            let scale = 2.0 / n.max(1) as f64;
            fft_1d(values).values.iter().map(|c| c.norm() * scale).collect()
        }
        [rows, cols] => fft_2d(values, rows, cols)?
            .values
            .iter()
            .map(|c| c.norm())
            .collect(),
        _ => {
            return Err(Error::Unsupported(format!(
                "amplitude spectra of {}-D signals",
                shape.len()
            )))
        }
    };
    if let Some(dc) = mags.first_mut() {
        *dc = 0.0;
    }
    Ok(AmplitudeSpectrum {
        shape: shape.to_vec(),
        values: mags,
    })
}

/// Cosine similarity `Σ AₙGₙ / (‖A‖‖G‖)` over all bins.
pub fn rho_ag(a: &AmplitudeSpectrum, g: &AmplitudeSpectrum) -> Result<f64> {
    if a.shape != g.shape {
        return Err(Error::InvalidShape(format!(
            "rho_ag: {:?} vs {:?}",
            a.shape, g.shape
        )));
    }
    let dot: f64 = a.values.iter().zip(&g.values).map(|(x, y)| x * y).sum();
    let na = a.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let ng = g.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if ng == 0.0 {
        return Err(Error::UndefinedSimilarity("ground-truth spectrum"));
    }
    if na == 0.0 {
        return Err(Error::UndefinedSimilarity("reconstruction spectrum"));
    }
    Ok((dot / (na * ng)).clamp(0.0, 1.0))
}

/// ρ_AG between two real signals of the same shape.
pub fn rho_ag_signals(recon: &[f64], truth: &[f64], shape: &[usize]) -> Result<f64> {
    rho_ag(
        &amplitude_spectrum(recon, shape)?,
        &amplitude_spectrum(truth, shape)?,
    )
}

/// Signed angular frequency of bin `k` out of `n`, in radians per sample.
pub fn angular_frequency(k: usize, n: usize) -> f64 {
    let signed = if 2 * k < n {
        k as f64
    } else {
        k as f64 - n as f64
    };
    TAU * signed / n as f64
}

/// Multiplies each bin by `i·ωₙ`: the spectrum of the signal's derivative.
pub fn fourier_gradient_1d(spectrum: &ComplexSpectrum) -> ComplexSpectrum {
    let n = spectrum.values.len();
    ComplexSpectrum {
        shape: spectrum.shape.clone(),
        values: spectrum
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| v * Complex64::new(0.0, angular_frequency(k, n)))
            .collect(),
    }
}

/// Spectrum of `∂/∂axis` for a 2D spectrum; axis 0 runs down rows, axis 1 across columns.
pub fn fourier_gradient_2d(spectrum: &ComplexSpectrum, axis: usize) -> Result<ComplexSpectrum> {
    let [rows, cols] = spectrum.shape[..] else {
        return Err(Error::Unsupported("fourier_gradient_2d needs a 2D spectrum".into()));
    };
    if axis > 1 {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
    }
    let values = spectrum
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let (u, w) = (i / cols, i % cols);
            let omega = if axis == 0 {
                angular_frequency(u, rows)
            } else {
                angular_frequency(w, cols)
            };
            v * Complex64::new(0.0, omega)
        })
        .collect();
    Ok(ComplexSpectrum {
        shape: spectrum.shape.clone(),
        values,
    })
}
