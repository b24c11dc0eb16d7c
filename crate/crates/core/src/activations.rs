//! Pointwise nonlinearities and their exact derivatives.
//!
//! The semiperiodic family is `sin(u)·δ(u)` evaluated at the frequency-scaled
//! pre-activation `u = ω₀·x`. With `δ ≡ 1` it is the plain sine network.
//! `SqrtAbs` and `LogAbs` floor `|u|` at `clamp_eps` (sign preserved) so the
//! `1/√|u|` and `1/u` factors in the derivative stay bounded.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_OMEGA0: f64 = 30.0;
pub const DEFAULT_CLAMP_EPS: f64 = 1e-30;

/// Beyond this magnitude the three-part reduction loses bits; defer to libm.
const FAST_TRIG_LIMIT: f64 = 1e8;

/// `(sin x, cos x)` in one pass, within one ulp-scale of libm on `|x| ≤ 1e8`.
///
/// Reduces by π/2 with a three-term Cody-Waite split, then evaluates the
/// Cephes minimax polynomials on `[-π/4, π/4]`.
#[inline(always)]
pub(crate) fn sin_cos(x: f64) -> (f64, f64) {
    if !(x.abs() <= FAST_TRIG_LIMIT) {
        return x.sin_cos();
    }
    sin_cos_reduced(x)
}

/// [`sin_cos`] without the large-argument guard; needs `|x| ≤ FAST_TRIG_LIMIT`.
#[inline(always)]
fn sin_cos_reduced(x: f64) -> (f64, f64) {
    const PIO2_1: f64 = 1.570_796_251_296_997_070_31;
    const PIO2_2: f64 = 7.549_789_415_861_596_353_36e-8;
    const PIO2_3: f64 = 5.390_302_858_158_119_052_9e-15;
    // Adding 1.5·2^52 rounds to the nearest integer and leaves it in the low
    // mantissa bits, which avoids a libm `round` call on baseline x86_64.
    const SHIFT: f64 = 6_755_399_441_055_744.0;
    let shifted = x * std::f64::consts::FRAC_2_PI + SHIFT;
    let q = shifted.to_bits();
    let k = shifted - SHIFT;
    let r = ((x - k * PIO2_1) - k * PIO2_2) - k * PIO2_3;
    let z = r * r;
    let sin_poly = ((((1.589_623_015_765_465_680_60e-10 * z - 2.505_074_776_285_780_728_66e-8) * z
        + 2.755_731_362_138_572_452_13e-6)
        * z
        - 1.984_126_982_958_953_859_96e-4)
        * z
        + 8.333_333_333_322_118_588_78e-3)
        * z
        - 1.666_666_666_666_663_072_95e-1;
    let cos_poly = ((((-1.135_853_652_138_768_173_00e-11 * z + 2.087_570_084_197_473_167_78e-9) * z
        - 2.755_731_417_929_673_881_12e-7)
        * z
        + 2.480_158_728_885_170_453_48e-5)
        * z
        - 1.388_888_888_887_305_641_16e-3)
        * z
        + 4.166_666_666_666_659_292_18e-2;
    let s = r + r * z * sin_poly;
    let c = 1.0 - 0.5 * z + z * z * cos_poly;
    let swap = q & 1 == 1;
    let sin = if swap { c } else { s };
    let cos = if swap { s } else { c };
    let sin = f64::from_bits(sin.to_bits() ^ ((q & 2) << 62));
    let cos = f64::from_bits(cos.to_bits() ^ (((q + 1) & 2) << 62));
    (sin, cos)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DampingKind {
    Const1,
    SqrtAbs,
    LogAbs,
    Arctan,
    SqrtRelu,
    Identity,
    Square,
}

impl DampingKind {
    pub const ALL: [DampingKind; 7] = [
        DampingKind::Const1,
        DampingKind::SqrtAbs,
        DampingKind::LogAbs,
        DampingKind::Arctan,
        DampingKind::SqrtRelu,
        DampingKind::Identity,
        DampingKind::Square,
    ];

    /// Linear and superlinear dampings, kept only for the ablation.
    pub fn diagnostic_only(self) -> bool {
        matches!(self, DampingKind::Identity | DampingKind::Square)
    }

    pub fn is_clamped(self) -> bool {
        matches!(self, DampingKind::SqrtAbs | DampingKind::LogAbs)
    }

    pub fn name(self) -> &'static str {
        match self {
            DampingKind::Const1 => "const1",
            DampingKind::SqrtAbs => "sqrtabs",
            DampingKind::LogAbs => "logabs",
            DampingKind::Arctan => "arctan",
            DampingKind::SqrtRelu => "sqrtrelu",
            DampingKind::Identity => "identity",
            DampingKind::Square => "square",
        }
    }

    /// δ(u), unclamped.
    #[inline]
    pub fn value(self, u: f64) -> f64 {
        match self {
            DampingKind::Const1 => 1.0,
            DampingKind::SqrtAbs => u.abs().sqrt(),
            DampingKind::LogAbs => u.abs().ln(),
            DampingKind::Arctan => u.atan(),
            DampingKind::SqrtRelu => u.max(0.0).sqrt(),
            DampingKind::Identity => u,
            DampingKind::Square => u * u,
        }
    }

    /// δ'(u), unclamped. `SqrtRelu` takes the zero branch at `u <= 0`.
    #[inline]
    pub fn derivative(self, u: f64) -> f64 {
        match self {
            DampingKind::Const1 => 0.0,
            DampingKind::SqrtAbs => u.signum() * 0.5 / u.abs().sqrt(),
            DampingKind::LogAbs => 1.0 / u,
            DampingKind::Arctan => 1.0 / (1.0 + u * u),
            DampingKind::SqrtRelu => {
                if u > 0.0 {
                    0.5 / u.sqrt()
                } else {
                    0.0
                }
            }
            DampingKind::Identity => 1.0,
            DampingKind::Square => 2.0 * u,
        }
    }
}

impl fmt::Display for DampingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DampingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.to_ascii_lowercase().as_str() {
            "const1" | "one" | "const" => DampingKind::Const1,
            "sqrtabs" | "sqrt" => DampingKind::SqrtAbs,
            "logabs" | "log" => DampingKind::LogAbs,
            "arctan" | "atan" => DampingKind::Arctan,
            "sqrtrelu" => DampingKind::SqrtRelu,
            "identity" | "linear" => DampingKind::Identity,
            "square" => DampingKind::Square,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown damping '{other}'"
                )))
            }
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ActivationKind {
    Relu,
    Semiperiodic(DampingKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationSpec {
    pub kind: ActivationKind,
    pub omega0: f64,
    pub clamp_eps: f64,
}

impl Default for ActivationSpec {
    fn default() -> Self {
        Self::spder(DampingKind::SqrtAbs)
    }
}

impl ActivationSpec {
    pub fn new(kind: ActivationKind, omega0: f64, clamp_eps: f64) -> Result<Self> {
        if !(omega0 > 0.0 && omega0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "omega0 must be positive, got {omega0}"
            )));
        }
        if !(clamp_eps >= 0.0 && clamp_eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "clamp_eps must be non-negative, got {clamp_eps}"
            )));
        }
        Ok(Self {
            kind,
            omega0,
            clamp_eps,
        })
    }

    pub fn relu() -> Self {
        Self {
            kind: ActivationKind::Relu,
            omega0: DEFAULT_OMEGA0,
            clamp_eps: DEFAULT_CLAMP_EPS,
        }
    }

    pub fn siren() -> Self {
        Self::spder(DampingKind::Const1)
    }

    pub fn spder(damping: DampingKind) -> Self {
        Self {
            kind: ActivationKind::Semiperiodic(damping),
            omega0: DEFAULT_OMEGA0,
            clamp_eps: DEFAULT_CLAMP_EPS,
        }
    }

    pub fn with_omega0(mut self, omega0: f64) -> Self {
        self.omega0 = omega0;
        self
    }

    pub fn is_relu(&self) -> bool {
        matches!(self.kind, ActivationKind::Relu)
    }

    /// Floors `|u|` at `clamp_eps` for the clamped dampings. The flag is true
    /// when the floor was active, in which case `ũ` no longer depends on `u`.
    #[inline]
    fn clamp(&self, damping: DampingKind, u: f64) -> (f64, bool) {
        if damping.is_clamped() && u.abs() < self.clamp_eps {
            let sign = if u.is_sign_negative() { -1.0 } else { 1.0 };
            (sign * self.clamp_eps, true)
        } else {
            (u, false)
        }
    }

    #[inline]
    pub fn forward(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Semiperiodic(d) => {
                let u = self.omega0 * x;
                let (uc, _) = self.clamp(d, u);
                sin_cos(u).0 * d.value(uc)
            }
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        self.forward_with_derivative(x).1
    }

    /// `(f(x), f'(x))` sharing one `sin_cos` evaluation.
    #[inline]
    pub fn forward_with_derivative(&self, x: f64) -> (f64, f64) {
        match self.kind {
            ActivationKind::Relu => {
                if x > 0.0 {
                    (x, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            ActivationKind::Semiperiodic(d) => self.semiperiodic_pair(d, x),
        }
    }

    /// Elementwise over a slice: pushes `f(z)` onto `out` and, when `deriv`
    /// is given, `f'(z)` onto it. Same values as the scalar methods.
    pub fn apply_slice(&self, z: &[f64], out: &mut Vec<f64>, deriv: Option<&mut Vec<f64>>) {
        let kind = match self.kind {
            ActivationKind::Relu => {
                out.extend(z.iter().map(|&x| x.max(0.0)));
                if let Some(d) = deriv {
                    d.extend(z.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }));
                }
                return;
            }
            ActivationKind::Semiperiodic(kind) => kind,
        };
        // One loop per damping so the damping is a constant inside it.
        macro_rules! dispatch {
            ($($k:ident),*) => {
                match kind {
                    $(DampingKind::$k => {
                        const D: DampingKind = DampingKind::$k;
                        let fast = z.iter().all(|&x| (self.omega0 * x).abs() <= FAST_TRIG_LIMIT);
                        let start = out.len();
                        out.resize(start + z.len(), 0.0);
                        let out = &mut out[start..];
                        match (deriv, fast) {
                            (Some(d), true) => {
                                let dstart = d.len();
                                d.resize(dstart + z.len(), 0.0);
                                for ((o, g), &x) in out.iter_mut().zip(&mut d[dstart..]).zip(z) {
                                    (*o, *g) = self.semiperiodic_fast(D, x);
                                }
                            }
                            (Some(d), false) => {
                                for (o, &x) in out.iter_mut().zip(z) {
                                    let (f, df) = self.semiperiodic_pair(D, x);
                                    *o = f;
                                    d.push(df);
                                }
                            }
                            (None, true) => {
                                for (o, &x) in out.iter_mut().zip(z) {
                                    *o = self.semiperiodic_fast(D, x).0;
                                }
                            }
                            (None, false) => {
                                for (o, &x) in out.iter_mut().zip(z) {
                                    *o = self.semiperiodic_pair(D, x).0;
                                }
                            }
                        }
                    })*
                }
            };
        }
        dispatch!(Const1, SqrtAbs, LogAbs, Arctan, SqrtRelu, Identity, Square);
    }

    #[inline(always)]
    fn semiperiodic_pair(&self, d: DampingKind, x: f64) -> (f64, f64) {
        let u = self.omega0 * x;
        self.combine(d, u, sin_cos(u))
    }

    /// Caller guarantees `|ω₀x| ≤ FAST_TRIG_LIMIT`.
    #[inline(always)]
    fn semiperiodic_fast(&self, d: DampingKind, x: f64) -> (f64, f64) {
        let u = self.omega0 * x;
        self.combine(d, u, sin_cos_reduced(u))
    }

    #[inline(always)]
    fn combine(&self, d: DampingKind, u: f64, (s, c): (f64, f64)) -> (f64, f64) {
        let (uc, clamped) = self.clamp(d, u);
        let damp = d.value(uc);
        let ddamp = if clamped { 0.0 } else { d.derivative(uc) };
        (s * damp, self.omega0 * (c * damp + s * ddamp))
    }
}

/// A root `x` of the activation derivative and the activation value `y` there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryPoint {
    pub x: f64,
    pub y: f64,
}

const SCAN_STEPS_PER_PERIOD: f64 = 200.0;
const BISECTION_ITERS: usize = 80;

/// Interior roots of `d/dx [sin(ω₀x)·δ(ω₀x)]` on `[lo, hi]`.
///
/// Scans at 1/200 of the sine period and refines every sign change by
/// bisection. Roots that land on an endpoint are dropped.
pub fn stationary_values(
    damping: DampingKind,
    omega0: f64,
    lo: f64,
    hi: f64,
) -> Vec<StationaryPoint> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() || !(omega0 > 0.0) {
        return Vec::new();
    }
    let spec = ActivationSpec {
        kind: ActivationKind::Semiperiodic(damping),
        omega0,
        clamp_eps: DEFAULT_CLAMP_EPS,
    };
    let step = std::f64::consts::TAU / omega0 / SCAN_STEPS_PER_PERIOD;
    let n = ((hi - lo) / step).ceil() as usize;
    let at = |i: usize| if i >= n { hi } else { lo + i as f64 * step };

    let mut roots = Vec::new();
    let mut prev_x = lo;
    let mut prev_d = spec.derivative(lo);
    for i in 1..=n {
        let x = at(i);
        let d = spec.derivative(x);
        if prev_d == 0.0 {
            if prev_x > lo {
                roots.push(prev_x);
            }
        } else if prev_d.signum() != d.signum() && d != 0.0 {
            roots.push(bisect(&spec, prev_x, x, prev_d));
        }
        prev_x = x;
        prev_d = d;
    }
    roots
        .into_iter()
        .filter(|&x| x > lo && x < hi)
        .map(|x| StationaryPoint {
            x,
            y: spec.forward(x),
        })
        .collect()
}

fn bisect(spec: &ActivationSpec, mut a: f64, mut b: f64, mut da: f64) -> f64 {
    for _ in 0..BISECTION_ITERS {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let dm = spec.derivative(m);
        if dm == 0.0 {
            return m;
        }
        if dm.signum() == da.signum() {
            a = m;
            da = dm;
        } else {
            b = m;
        }
    }
    // Pick whichever bracket end has the smaller residual.
    if spec.derivative(a).abs() <= spec.derivative(b).abs() {
        a
    } else {
        b
    }
}

/// `max |f'(x)|` over `samples` evenly spaced points of `[a − radius, a + radius]`,
/// for `f = sin(x)·δ(x)` (ω₀ = 1).
pub fn empirical_lipschitz(damping: DampingKind, a: f64, radius: f64, samples: usize) -> f64 {
    assert!(radius > 0.0, "radius must be positive");
    assert!(samples >= 2, "need at least two samples");
    let spec = ActivationSpec {
        kind: ActivationKind::Semiperiodic(damping),
        omega0: 1.0,
        clamp_eps: DEFAULT_CLAMP_EPS,
    };
    let lo = a - radius;
    let step = 2.0 * radius / (samples - 1) as f64;
    (0..samples)
        .map(|i| spec.derivative(lo + i as f64 * step).abs())
        .fold(0.0, f64::max)
}

/// `|δ(a)| + |δ'(a)|`, the scale the local Lipschitz constant tracks.
pub fn lipschitz_scale(damping: DampingKind, a: f64) -> f64 {
    damping.value(a).abs() + damping.derivative(a).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fused_sin_cos_matches_libm() {
        let mut worst = 0.0f64;
        let specials = [0.0, -0.0, 1e-300, std::f64::consts::FRAC_PI_4, 1e5 + 0.1, -9.9e7, 3e8, 1e300];
        let sweep = (0..200_000).map(|i| (i as f64 * 0.7131).sin() * 60.0);
        for x in sweep.chain(specials) {
            let (s, c) = sin_cos(x);
            worst = worst.max((s - x.sin()).abs()).max((c - x.cos()).abs());
        }
        assert!(worst <= 4.0 * f64::EPSILON, "worst {worst:e}");
        assert!(sin_cos(f64::NAN).0.is_nan() && sin_cos(f64::INFINITY).1.is_nan());
    }

    #[test]
    fn slice_kernel_matches_scalar_path() {
        let mut specs = vec![ActivationSpec::relu()];
        specs.extend(DampingKind::ALL.iter().map(|&d| ActivationSpec::spder(d)));
        let ordinary: Vec<f64> = (0..500).map(|i| (i as f64 * 0.37).sin() * 0.3).chain([0.0, -0.0, 1e-40]).collect();
        // one huge entry sends the whole slice down the libm path
        let huge: Vec<f64> = ordinary.iter().copied().chain([1e9]).collect();
        for spec in specs {
            for z in [&ordinary, &huge] {
                let (mut a, mut d, mut only) = (Vec::new(), Vec::new(), vec![7.0]);
                spec.apply_slice(z, &mut a, Some(&mut d));
                spec.apply_slice(z, &mut only, None);
                for (i, &x) in z.iter().enumerate() {
                    let (f, df) = spec.forward_with_derivative(x);
                    assert_eq!((a[i].to_bits(), d[i].to_bits()), (f.to_bits(), df.to_bits()), "{:?} at {x}", spec.kind);
                    assert_eq!(only[i + 1].to_bits(), spec.forward(x).to_bits());
                }
                assert_eq!(only[0], 7.0);
            }
        }
    }

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(d: DampingKind) -> ActivationSpec {
        ActivationSpec::spder(d).with_omega0(1.0)
    }

    #[test]
    fn sqrtabs_zero_input() {
        assert_eq!(unit(DampingKind::SqrtAbs).forward(0.0), 0.0);
    }

    #[test]
    fn sqrtabs_first_peak() {
        // root of tan x = -2x
        let spec = unit(DampingKind::SqrtAbs);
        let x = bisect(&spec, 1.7, 2.0, spec.derivative(1.7));
        assert!((x - 1.8366).abs() < 1e-3);
        assert!((spec.forward(x) - 1.31).abs() < 0.01);
        assert!(spec.derivative(x).abs() < 1e-12);
        let residual = 2.0 * x * x.cos() + x.sin();
        assert!(residual.abs() < 1e-12);
    }

    #[test]
    fn arctan_tends_to_half_pi_sine() {
        let spec = unit(DampingKind::Arctan);
        for &x in &[1e4 + 0.3, 2e5 + 1.1, -3e5 - 0.7f64] {
            let target = std::f64::consts::FRAC_PI_2 * x.signum() * x.sin();
            assert!((spec.forward(x) - target).abs() < 1e-3, "x={x}");
        }
    }

    #[test]
    fn const1_is_sine() {
        let spec = ActivationSpec::siren();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-3.0..3.0);
            assert!((spec.forward(x) - (30.0 * x).sin()).abs() <= 1e-15);
        }
    }

    #[test]
    fn relu_derivative() {
        let spec = ActivationSpec::relu();
        assert_eq!(spec.derivative(3.0), 1.0);
        assert_eq!(spec.derivative(-3.0), 0.0);
        assert_eq!(spec.forward(-2.0), 0.0);
        assert_eq!(spec.forward(2.5), 2.5);
    }

    fn all_specs() -> Vec<ActivationSpec> {
        let mut specs = vec![ActivationSpec::relu()];
        for d in DampingKind::ALL {
            specs.push(ActivationSpec::spder(d));
            specs.push(unit(d));
        }
        specs
    }

    #[test]
    fn derivative_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = 1e-6;
        for spec in all_specs() {
            let scale = 1.0 / spec.omega0;
            let mut checked = 0;
            while checked < 1000 {
                let x: f64 = rng.random_range(-4.0..4.0) * scale;
                let u = x * spec.omega0;
                if u.abs() < 1e-3 || (u - h * spec.omega0).signum() != (u + h * spec.omega0).signum()
                {
                    continue;
                }
                if matches!(spec.kind, ActivationKind::Relu) && x.abs() < 1e-3 {
                    continue;
                }
                let fd = (spec.forward(x + h) - spec.forward(x - h)) / (2.0 * h);
                let an = spec.derivative(x);
                let denom = an.abs().max(fd.abs()).max(1.0);
                assert!(
                    (fd - an).abs() / denom < 1e-5,
                    "{spec:?} x={x} fd={fd} analytic={an}"
                );
                checked += 1;
            }
        }
    }

    #[test]
    fn clamped_derivatives_are_finite_at_zero() {
        for d in [DampingKind::SqrtAbs, DampingKind::LogAbs, DampingKind::SqrtRelu] {
            let spec = ActivationSpec::spder(d);
            for x in [0.0, -0.0, 1e-40, -1e-40, 5e-324] {
                let (f, df) = spec.forward_with_derivative(x);
                assert!(f.is_finite() && df.is_finite(), "{d} at {x}: {f} {df}");
            }
        }
    }

    #[test]
    fn sqrtabs_stationary_values_on_zero_to_six() {
        let pts = stationary_values(DampingKind::SqrtAbs, 1.0, 0.0, 6.0);
        let ys: Vec<f64> = pts.iter().map(|p| p.y.abs()).collect();
        assert_eq!(ys.len(), 2, "{pts:?}");
        assert!((ys[0] - 1.31).abs() < 0.01);
        assert!((ys[1] - 2.18).abs() < 0.01);
    }

    #[test]
    fn logabs_stationary_values() {
        let pts = stationary_values(DampingKind::LogAbs, 1.0, 0.01, 8.0);
        let ys: Vec<f64> = pts.iter().map(|p| p.y.abs()).collect();
        let want = [0.36, 0.64, 1.56, 2.06];
        assert_eq!(ys.len(), want.len(), "{pts:?}");
        for (y, w) in ys.iter().zip(want) {
            assert!((y - w).abs() < 0.01, "{y} vs {w}");
        }
    }

    #[test]
    fn arctan_first_nonzero_peak() {
        let pts = stationary_values(DampingKind::Arctan, 1.0, -0.5, 8.0);
        assert!(pts[0].x.abs() < 1e-9 && pts[0].y.abs() < 1e-12);
        let first = pts.iter().find(|p| p.y.abs() > 1e-6).unwrap();
        assert!((first.y - 1.04).abs() < 0.01);
    }

    #[test]
    fn stationary_points_are_roots() {
        for d in [DampingKind::SqrtAbs, DampingKind::LogAbs, DampingKind::Arctan] {
            for omega0 in [1.0, 30.0] {
                let spec = ActivationSpec::spder(d).with_omega0(omega0);
                for p in stationary_values(d, omega0, 0.01 / omega0, 12.0 / omega0) {
                    assert!(spec.derivative(p.x).abs() < 1e-9, "{d} ω₀={omega0} {p:?}");
                }
            }
        }
    }

    #[test]
    fn stationary_values_scale_with_omega0() {
        let base = stationary_values(DampingKind::SqrtAbs, 1.0, 0.0, 12.0);
        let fast = stationary_values(DampingKind::SqrtAbs, 30.0, 0.0, 12.0 / 30.0);
        assert_eq!(base.len(), fast.len());
        for (a, b) in base.iter().zip(&fast) {
            assert!((a.y - b.y).abs() < 1e-9);
            assert!((a.x - 30.0 * b.x).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_interval_has_no_roots() {
        assert!(stationary_values(DampingKind::SqrtAbs, 1.0, 3.0, 3.0).is_empty());
        assert!(stationary_values(DampingKind::SqrtAbs, 1.0, 3.0, 1.0).is_empty());
    }

    #[test]
    fn lipschitz_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let a = rng.random_range(-100.0..100.0);
            assert!(empirical_lipschitz(DampingKind::Const1, a, 1.0, 200) <= 1.0);
        }
        let l = empirical_lipschitz(DampingKind::SqrtAbs, 100.0, 0.5, 2001);
        assert!((l - 10.0).abs() < 1.0, "{l}");

        let sq: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&a| empirical_lipschitz(DampingKind::Square, a, 0.5, 2001))
            .collect();
        assert!(sq[1] >= 10.0 * sq[0] && sq[2] >= 10.0 * sq[1], "{sq:?}");
    }

    #[test]
    fn sublinear_lipschitz_ratio_is_bounded() {
        for d in [DampingKind::SqrtAbs, DampingKind::LogAbs, DampingKind::Arctan] {
            let mut worst: f64 = 0.0;
            let mut a = 1.0;
            while a <= 1e4 {
                let ratio = empirical_lipschitz(d, a, 0.5, 501) / lipschitz_scale(d, a);
                worst = worst.max(ratio);
                a *= 1.25;
            }
            assert!(worst < 4.0, "{d}: ratio reached {worst}");
        }
    }

    #[test]
    fn parse_round_trip() {
        for d in DampingKind::ALL {
            assert_eq!(d.name().parse::<DampingKind>().unwrap(), d);
        }
        assert!("nope".parse::<DampingKind>().is_err());
        assert!(DampingKind::Square.diagnostic_only());
        assert!(!DampingKind::SqrtAbs.diagnostic_only());
    }

    #[test]
    fn spec_validation() {
        assert!(ActivationSpec::new(ActivationKind::Relu, 0.0, 0.0).is_err());
        assert!(ActivationSpec::new(ActivationKind::Relu, 30.0, -1.0).is_err());
        assert!(ActivationSpec::new(ActivationKind::Relu, 30.0, 0.0).is_ok());
        let d = ActivationSpec::default();
        assert_eq!(d.omega0, 30.0);
        assert_eq!(d.clamp_eps, 1e-30);
    }
}
