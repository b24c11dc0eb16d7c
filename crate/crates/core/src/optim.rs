//! Full-batch training with Adam.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{psnr_from_mse, MetricSnapshot};
use crate::network::{backward, forward, init_mlp, predict, MlpConfig, MlpParams};
use crate::signal::{CoordGrid, Signal};
use crate::spectral::rho_ag_signals;
use crate::tensor::Matrix;

pub const DEFAULT_CHECKPOINTS: [usize; 4] = [25, 100, 500, 1000];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let beta_ok = |b: f64| (0.0..1.0).contains(&b);
        if !(self.lr > 0.0 && self.lr.is_finite())
            || !beta_ok(self.beta1)
            || !beta_ok(self.beta2)
            || !(self.eps >= 0.0 && self.eps.is_finite())
        {
            return Err(Error::InvalidArgument(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    m: MlpParams,
    v: MlpParams,
}

impl AdamState {
    pub fn new(params: &MlpParams) -> Self {
        Self {
            t: 0,
            m: MlpParams::zeros_like(params),
            v: MlpParams::zeros_like(params),
        }
    }
}

/// Mean squared error and its gradient `2(pred − target)/count`.
pub fn mse_loss_and_grad(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape {
            op: "mse loss",
            left: pred.shape(),
            right: target.shape(),
        });
    }
    let n = pred.data().len();
    if n == 0 {
        return Err(Error::InvalidArgument("loss over an empty batch".into()));
    }
    let scale = 2.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(n);
    for (p, t) in pred.data().iter().zip(target.data()) {
        let r = p - t;
        loss += r * r;
        grad.push(scale * r);
    }
    Ok((loss / n as f64, Matrix::new(pred.rows(), pred.cols(), grad)?))
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut MlpParams,
    grads: &MlpParams,
    state: &mut AdamState,
    hyper: &AdamHyper,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.m) {
        return Err(Error::InvalidShape("Adam: params, grads and state disagree".into()));
    }
    let step = state.t as usize + 1;
    for (i, g) in grads.tensors().flatten().enumerate() {
        if !g.is_finite() {
            return Err(Error::Diverged {
                step,
                reason: format!("non-finite gradient entry {i}"),
            });
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2_sqrt = (1.0 - hyper.beta2.powi(t)).sqrt();
    let step_size = hyper.lr / bc1;
    let tensors = params
        .tensors_mut()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut().zip(state.v.tensors_mut()));
    for ((p, g), (m, v)) in tensors {
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * g;
            *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * g * g;
            *p -= step_size * *m / (v.sqrt() / bc2_sqrt + hyper.eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub steps: usize,
    pub hyper: AdamHyper,
    /// Steps at which a [`MetricSnapshot`] (with ρ_AG for 1D/2D targets) is taken.
    pub checkpoints: Vec<usize>,
}

impl TrainOptions {
    pub fn new(steps: usize, hyper: AdamHyper) -> Self {
        Self {
            steps,
            hyper,
            checkpoints: DEFAULT_CHECKPOINTS.to_vec(),
        }
    }

    pub fn with_checkpoints(mut self, checkpoints: &[usize]) -> Self {
        self.checkpoints = checkpoints.to_vec();
        self
    }
}

/// Time series of one fit.
///
/// `loss_curve[s − 1]` is the MSE of the parameters going into update `s`, so
/// step 1 is the untrained network. `final_loss` is measured after the last
/// update. The reported representation is the min-loss one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps: usize,
    pub loss_curve: Vec<f64>,
    pub psnr_curve: Vec<f64>,
    pub snapshots: Vec<MetricSnapshot>,
    pub final_loss: f64,
    pub best_loss: f64,
    /// Updates applied to reach the min-loss parameters.
    pub best_step: usize,
    /// ρ_AG of the min-loss reconstruction, when the target is 1D or 2D.
    pub final_rho: Option<f64>,
    pub wall_ms: u64,
}

impl TrainReport {
    pub fn best_psnr(&self) -> f64 {
        psnr_from_mse(self.best_loss)
    }

    pub fn snapshot(&self, step: usize) -> Option<&MetricSnapshot> {
        self.snapshots.iter().find(|s| s.step == step)
    }

    pub fn loss_at(&self, step: usize) -> Option<f64> {
        step.checked_sub(1).and_then(|i| self.loss_curve.get(i).copied())
    }

    /// Per-step rows, with ρ_AG filled in at checkpoints. Timing is left out
    /// so equal runs give equal bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(MetricSnapshot::CSV_HEADER);
        out.push('\n');
        for (i, &loss) in self.loss_curve.iter().enumerate() {
            let step = i + 1;
            let row = match self.snapshot(step) {
                Some(s) => *s,
                None => MetricSnapshot::new(step, loss, None),
            };
            out.push_str(&row.csv_row());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: MlpParams,
    pub best_params: MlpParams,
    pub report: TrainReport,
}

/// A fit that stopped on a numeric failure, with everything learned so far.
#[derive(Debug)]
pub struct FitFailure {
    pub error: Error,
    pub partial: Box<FitOutcome>,
}

impl From<FitFailure> for Error {
    fn from(f: FitFailure) -> Self {
        f.error
    }
}

fn spectral_shape(target: &Signal) -> Option<&[usize]> {
    (target.dims() <= 2).then(|| target.shape())
}

fn rho_for(pred: &Matrix, target: &Signal) -> Option<f64> {
    let shape = spectral_shape(target)?;
    rho_ag_signals(pred.data(), target.values(), shape).ok()
}

/// Trains freshly initialized parameters on one full batch.
pub fn fit(
    config: &MlpConfig,
    grid: &CoordGrid,
    target: &Signal,
    options: &TrainOptions,
) -> std::result::Result<FitOutcome, FitFailure> {
    let params = init_mlp(config).map_err(|error| FitFailure {
        error,
        partial: Box::new(empty_outcome(&MlpParams::zeros_for(config))),
    })?;
    fit_from(config, params, grid, target, options)
}

fn empty_outcome(params: &MlpParams) -> FitOutcome {
    FitOutcome {
        params: params.clone(),
        best_params: params.clone(),
        report: TrainReport {
            steps: 0,
            loss_curve: Vec::new(),
            psnr_curve: Vec::new(),
            snapshots: Vec::new(),
            final_loss: f64::NAN,
            best_loss: f64::NAN,
            best_step: 0,
            final_rho: None,
            wall_ms: 0,
        },
    }
}

/// As [`fit`], starting from given parameters.
pub fn fit_from(
    config: &MlpConfig,
    params: MlpParams,
    grid: &CoordGrid,
    target: &Signal,
    options: &TrainOptions,
) -> std::result::Result<FitOutcome, FitFailure> {
    fit_with_hook(config, params, grid, target, options, &mut |_, _| Ok(()))
}

/// Called at each checkpoint step with the prediction of that step.
pub type CheckpointHook<'a> = dyn FnMut(usize, &Matrix) -> Result<()> + 'a;

/// As [`fit_from`], handing each checkpoint's prediction to `hook`.
pub fn fit_with_hook(
    config: &MlpConfig,
    params: MlpParams,
    grid: &CoordGrid,
    target: &Signal,
    options: &TrainOptions,
    hook: &mut CheckpointHook<'_>,
) -> std::result::Result<FitOutcome, FitFailure> {
    let started = Instant::now();
    let mut outcome = empty_outcome(&params);
    let result = train(config, grid, target, options, &mut outcome, hook);
    outcome.report.wall_ms = started.elapsed().as_millis() as u64;
    match result {
        Ok(()) => Ok(outcome),
        Err(error) => Err(FitFailure {
            error,
            partial: Box::new(outcome),
        }),
    }
}

fn train(
    config: &MlpConfig,
    grid: &CoordGrid,
    target: &Signal,
    options: &TrainOptions,
    outcome: &mut FitOutcome,
    hook: &mut CheckpointHook<'_>,
) -> Result<()> {
    options.hyper.validate()?;
    if grid.len() != target.len() {
        return Err(Error::InvalidShape(format!(
            "grid has {} points, target has {} samples",
            grid.len(),
            target.len()
        )));
    }
    if config.out_dim != 1 || config.in_dim != grid.dims() {
        return Err(Error::InvalidShape(format!(
            "network maps {} -> {}, grid is {}-D with one channel",
            config.in_dim,
            config.out_dim,
            grid.dims()
        )));
    }
    let coords = grid.coords();
    let y = target.to_column();
    let mut state = AdamState::new(&outcome.params);
    let report = &mut outcome.report;
    report.best_loss = f64::INFINITY;

    for step in 1..=options.steps {
        let (pred, cache) = forward(&outcome.params, config, coords).map_err(|e| at_step(e, step))?;
        let (loss, d_out) = mse_loss_and_grad(&pred, &y)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                step,
                reason: "non-finite loss".into(),
            });
        }
        report.loss_curve.push(loss);
        report.psnr_curve.push(psnr_from_mse(loss));
        report.steps = step;
        if loss < report.best_loss {
            report.best_loss = loss;
            report.best_step = step - 1;
            outcome.best_params.clone_from(&outcome.params);
        }
        if options.checkpoints.contains(&step) {
            report
                .snapshots
                .push(MetricSnapshot::new(step, loss, rho_for(&pred, target)));
            hook(step, &pred)?;
        }
        let grads = backward(&outcome.params, config, &cache, &d_out)?;
        drop(cache);
        adam_step(&mut outcome.params, &grads, &mut state, &options.hyper)?;
    }

    let pred = predict(&outcome.params, config, coords).map_err(|e| at_step(e, options.steps + 1))?;
    let (final_loss, _) = mse_loss_and_grad(&pred, &y)?;
    report.final_loss = final_loss;
    if final_loss < report.best_loss {
        report.best_loss = final_loss;
        report.best_step = options.steps;
        outcome.best_params.clone_from(&outcome.params);
        report.final_rho = rho_for(&pred, target);
    } else {
        let best = predict(&outcome.best_params, config, coords)?;
        report.final_rho = rho_for(&best, target);
    }
    Ok(())
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::NonFinite { context, index } => Error::Diverged {
            step,
            reason: format!("non-finite value in {context} at index {index}"),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::{ActivationSpec, DampingKind};
    use crate::network::Layer;
    use crate::signal::{uniform_grid, UNIT_BOUNDS};

    fn scalar_params(w: f64) -> MlpParams {
        MlpParams {
            layers: vec![Layer {
                weight: Matrix::new(1, 1, vec![w]).unwrap(),
                bias: vec![0.0],
            }],
        }
    }

    #[test]
    fn loss_examples() {
        let p = Matrix::new(2, 1, vec![0.5, -0.25]).unwrap();
        let (l, g) = mse_loss_and_grad(&p, &p).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));

        let t = Matrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let shifted = t.map_elementwise(|v| v + 1.0).unwrap();
        let (l, g) = mse_loss_and_grad(&shifted, &t).unwrap();
        assert_eq!(l, 1.0);
        assert!(g.data().iter().all(|&v| v == 0.5));

        assert!(mse_loss_and_grad(&p, &t).is_err());
    }

    #[test]
    fn loss_gradient_matches_finite_difference() {
        let p = Matrix::new(3, 1, vec![0.3, -0.7, 0.1]).unwrap();
        let t = Matrix::new(3, 1, vec![0.0, 0.2, 0.4]).unwrap();
        let (_, g) = mse_loss_and_grad(&p, &t).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut plus = p.clone();
            plus.data_mut()[i] += h;
            let mut minus = p.clone();
            minus.data_mut()[i] -= h;
            let fd = (mse_loss_and_grad(&plus, &t).unwrap().0
                - mse_loss_and_grad(&minus, &t).unwrap().0)
                / (2.0 * h);
            assert!((fd - g.data()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut p = scalar_params(0.7);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &scalar_params(0.0), &mut s, &AdamHyper::default()).unwrap();
        assert_eq!(p.layers[0].weight.data(), &[0.7]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let hyper = AdamHyper::default();
        let mut p = scalar_params(0.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &scalar_params(1.0), &mut s, &hyper).unwrap();
        let want = -hyper.lr * 1.0 / (1.0 + hyper.eps);
        assert!((p.layers[0].weight.data()[0] - want).abs() < 1e-18);
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut p = scalar_params(0.0);
        let mut s = AdamState::new(&p);
        let bad = MlpParams {
            layers: vec![Layer {
                weight: Matrix::from_raw(1, 1, vec![f64::NAN]),
                bias: vec![0.0],
            }],
        };
        let err = adam_step(&mut p, &bad, &mut s, &AdamHyper::default()).unwrap_err();
        assert!(matches!(err, Error::Diverged { step: 1, .. }));
        assert_eq!(s.t, 0);
    }

    #[test]
    fn hyper_validation() {
        assert!(AdamHyper::default().validate().is_ok());
        assert!(AdamHyper::with_lr(0.0).validate().is_err());
        let bad = AdamHyper {
            beta2: 1.0,
            ..AdamHyper::default()
        };
        assert!(bad.validate().is_err());
    }

    fn small_config(act: ActivationSpec) -> MlpConfig {
        MlpConfig::new(2, 1, act).with_shape(3, 16).with_seed(5)
    }

    #[test]
    fn own_output_is_a_fixed_point() {
        let cfg = small_config(ActivationSpec::spder(DampingKind::SqrtAbs));
        let grid = uniform_grid(&[6, 6], UNIT_BOUNDS).unwrap();
        let params = init_mlp(&cfg).unwrap();
        let out = predict(&params, &cfg, grid.coords()).unwrap();
        let target = Signal::from_column(vec![6, 6], &out).unwrap();
        let fit = fit(&cfg, &grid, &target, &TrainOptions::new(20, AdamHyper::default())).unwrap();
        assert_eq!(fit.report.loss_curve[0], 0.0);
        assert!(fit.report.loss_curve.iter().all(|&l| l < 1e-10));
        assert_eq!(fit.report.best_loss, 0.0);
    }

    #[test]
    fn fits_are_reproducible_and_consistent() {
        let cfg = small_config(ActivationSpec::siren());
        let grid = uniform_grid(&[8, 8], UNIT_BOUNDS).unwrap();
        let target = Signal::new(
            vec![8, 8],
            grid.coords().data().chunks(2).map(|c| 0.5 * c[0] - 0.3 * c[1]).collect(),
        )
        .unwrap();
        let opts = TrainOptions::new(30, AdamHyper::with_lr(1e-3)).with_checkpoints(&[10, 30]);
        let a = fit(&cfg, &grid, &target, &opts).unwrap();
        let b = fit(&cfg, &grid, &target, &opts).unwrap();
        assert_eq!(a.report.to_csv(), b.report.to_csv());
        assert_eq!(a.params, b.params);

        let r = &a.report;
        assert_eq!(r.loss_curve.len(), 30);
        assert_eq!(r.psnr_curve.len(), 30);
        assert_eq!(r.snapshots.len(), 2);
        for s in &r.snapshots {
            assert!((s.psnr_db - psnr_from_mse(s.mse)).abs() < 1e-9);
            assert_eq!(Some(s.mse), r.loss_at(s.step));
            assert!(s.rho_ag.is_some());
        }
        let min = r.loss_curve.iter().copied().fold(r.final_loss, f64::min);
        assert_eq!(r.best_loss, min);
        let best_pred = predict(&a.best_params, &cfg, grid.coords()).unwrap();
        let (best, _) = mse_loss_and_grad(&best_pred, &target.to_column()).unwrap();
        assert_eq!(best, r.best_loss);
        assert_eq!(r.to_csv().lines().count(), 31);
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let cfg = small_config(ActivationSpec::relu());
        let grid = uniform_grid(&[4, 4], UNIT_BOUNDS).unwrap();
        let target = Signal::new(vec![3, 3], vec![0.0; 9]).unwrap();
        let err = fit(&cfg, &grid, &target, &TrainOptions::new(1, AdamHyper::default())).unwrap_err();
        assert!(matches!(err.error, Error::InvalidShape(_)));
    }

    #[test]
    fn divergence_keeps_partial_progress() {
        let cfg = small_config(ActivationSpec::relu());
        let grid = uniform_grid(&[4, 4], UNIT_BOUNDS).unwrap();
        let target = Signal::new(vec![4, 4], vec![0.5; 16]).unwrap();
        let huge = AdamHyper::with_lr(1e300);
        let err = fit(&cfg, &grid, &target, &TrainOptions::new(50, huge)).unwrap_err();
        assert!(err.error.is_numeric(), "{}", err.error);
        assert!(!err.partial.report.loss_curve.is_empty());
        assert!(err.partial.report.best_loss.is_finite());
    }
}
