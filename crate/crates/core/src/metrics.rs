//! MSE, PSNR and the 8-bit error scale for signals living in `[-1, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Peak-to-peak range of the training domain `[-1, 1]`.
pub const MAX_I: f64 = 2.0;

/// Pixel units per training unit: `255 / 2`.
pub const EIGHT_BIT_SCALE: f64 = 127.5;

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Shape {
            op: "mse",
            left: (pred.len(), 1),
            right: (target.len(), 1),
        });
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("mse of empty signals".into()));
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// `10·log₁₀(4/mse)` dB; `+inf` for a perfect reconstruction.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        f64::INFINITY
    } else {
        10.0 * (MAX_I * MAX_I / mse).log10()
    }
}

/// MSE on the 0–255 pixel scale.
pub fn mse_8bit(mse: f64) -> f64 {
    mse * EIGHT_BIT_SCALE * EIGHT_BIT_SCALE
}

/// CSV rendering of a metric: `inf` for infinities, empty for absent values.
pub fn format_value(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(x) if x.is_infinite() && x > 0.0 => "inf".into(),
        Some(x) if x.is_infinite() => "-inf".into(),
        Some(x) => format!("{x:e}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSnapshot {
    pub step: usize,
    pub mse: f64,
    pub psnr_db: f64,
    pub mse_8bit: f64,
    pub rho_ag: Option<f64>,
}

impl MetricSnapshot {
    pub fn new(step: usize, mse: f64, rho_ag: Option<f64>) -> Self {
        Self {
            step,
            mse,
            psnr_db: psnr_from_mse(mse),
            mse_8bit: mse_8bit(mse),
            rho_ag,
        }
    }

    pub const CSV_HEADER: &'static str = "step,mse,psnr_db,mse_8bit,rho_ag";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.step,
            format_value(Some(self.mse)),
            format_value(Some(self.psnr_db)),
            format_value(Some(self.mse_8bit)),
            format_value(self.rho_ag)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn psnr_examples() {
        assert!(psnr_from_mse(4.0).abs() < 1e-12);
        assert!((psnr_from_mse(4e-4) - 40.0).abs() < 1e-9);
        // SIREN step-500 loss against its reported 36.6 dB mean
        assert!((psnr_from_mse(0.0010) - 36.6).abs() < 1.5);
        assert_eq!(psnr_from_mse(0.0), f64::INFINITY);
        assert_eq!(format_value(Some(psnr_from_mse(0.0))), "inf");
    }

    #[test]
    fn psnr_is_strictly_decreasing() {
        let mut prev = f64::INFINITY;
        let mut m = 1e-12;
        while m < 10.0 {
            let p = psnr_from_mse(m);
            assert!(p < prev);
            prev = p;
            m *= 1.7;
        }
    }

    #[test]
    fn eight_bit_examples() {
        assert_eq!(mse_8bit(0.0), 0.0);
        let v = mse_8bit(6.7e-8);
        assert!((0.00105..=0.00115).contains(&v), "{v}");
    }

    #[test]
    fn eight_bit_inverts_affine_pixel_map() {
        // Pixel-domain error m maps to y-domain error m·(2/255)², and back.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let m: f64 = rng.random_range(0.0..100.0);
            let y_domain = m * (2.0f64 / 255.0).powi(2);
            assert!((mse_8bit(y_domain) - m).abs() <= 1e-12 * m.max(1.0));
        }
    }

    #[test]
    fn snapshot_consistency() {
        let s = MetricSnapshot::new(25, 0.01, Some(0.9));
        assert!((s.psnr_db - 10.0 * (4.0f64 / 0.01).log10()).abs() < 1e-12);
        assert_eq!(s.csv_row().split(',').count(), 5);
        assert!(MetricSnapshot::new(1, 0.5, None).csv_row().ends_with(','));
    }

    #[test]
    fn mse_shapes() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[2.0, 3.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }
}
