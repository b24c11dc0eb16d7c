use serde_json::json;

use super::{append_details, run_fit, Architecture, Domain, RunDir, TaskConfig, TaskRun};
use crate::activations::DampingKind;
use crate::error::{Error, Result};
use crate::metrics::{format_value, mse, MetricSnapshot};
use crate::network::{input_gradient, predict, MlpConfig, MlpParams};
use crate::optim::DEFAULT_CHECKPOINTS;
use crate::signal::{bilinear_resize, uniform_grid, Signal, UNIT_BOUNDS};
use crate::spectral::rho_ag_signals;

pub const IMAGE_DESK_MAX_SIDE: usize = 128;
pub const IMAGE_FULL_MAX_SIDE: usize = 1024;

/// Gradient magnitudes are divided by `max(peak, GRADIENT_GUARD)` for display,
/// so a nearly flat field stays nearly black instead of being stretched.
pub const GRADIENT_GUARD: f64 = 1.0;

fn check_image(image: &Signal, paper_scale: bool) -> Result<()> {
    let [h, w] = image.shape()[..] else {
        return Err(Error::InvalidShape(format!(
            "expected a 2D image, got shape {:?}",
            image.shape()
        )));
    };
    let cap = if paper_scale {
        IMAGE_FULL_MAX_SIDE
    } else {
        IMAGE_DESK_MAX_SIDE
    };
    if h.max(w) > cap {
        return Err(Error::InvalidArgument(format!(
            "{h}x{w} image exceeds the {cap}-pixel limit; resize it first{}",
            if paper_scale { "" } else { " or pass --paper-scale" }
        )));
    }
    Ok(())
}

fn write_recon(dir: &RunDir, step: usize, pred: &Signal) -> Result<()> {
    dir.write_image(&format!("recon_step{step:04}.pgm"), pred)
}

/// Fits one image and writes reconstructions at the checkpoint steps.
pub fn task_image_fit(image: &Signal, cfg: &TaskConfig) -> Result<TaskRun> {
    check_image(image, cfg.paper_scale)?;
    let grid = uniform_grid(image.shape(), UNIT_BOUNDS)?;
    let run = run_fit(
        "fit",
        cfg,
        Domain::Image,
        &grid,
        image,
        &[25, 100, 500],
        json!({ "image_shape": image.shape() }),
        &mut write_recon,
    )?;
    if let Some(dir) = &run.run_dir {
        dir.write_image("reconstruction.pgm", &run.reconstruction)?;
        dir.write_text("spectrum.csv", &super::spectrum_csv(&run.reconstruction)?)?;
    }
    Ok(run)
}

#[derive(Debug, Clone)]
pub struct GradientImage {
    /// `‖∂out/∂(row, col)‖₂` per pixel, in output units per coordinate unit.
    pub magnitude: Signal,
    /// `magnitude / max(peak, GRADIENT_GUARD)`, in `[0, 1]`.
    pub normalized: Signal,
    /// Raw per-axis derivatives, `(∂/∂row, ∂/∂col)`.
    pub d_row: Signal,
    pub d_col: Signal,
}

impl GradientImage {
    /// The normalized magnitude mapped onto `[-1, 1]` for 8-bit output.
    pub fn display(&self) -> Result<Signal> {
        Signal::new(
            self.normalized.shape().to_vec(),
            self.normalized.values().iter().map(|v| 2.0 * v - 1.0).collect(),
        )
    }
}

/// Differentiates a trained single-output image network on an `h × w` grid.
pub fn gradient_image(config: &MlpConfig, params: &MlpParams, shape: (usize, usize)) -> Result<GradientImage> {
    if config.in_dim != 2 {
        return Err(Error::Shape {
            op: "gradient image",
            left: (config.in_dim, config.out_dim),
            right: (2, 1),
        });
    }
    let grid = uniform_grid(&[shape.0, shape.1], UNIT_BOUNDS)?;
    let g = input_gradient(params, config, grid.coords())?;
    let n = grid.len();
    let (mut d_row, mut d_col, mut mag) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for r in 0..n {
        let (a, b) = (g.get(r, 0), g.get(r, 1));
        d_row.push(a);
        d_col.push(b);
        mag.push(a.hypot(b));
    }
    let peak = mag.iter().copied().fold(0.0, f64::max);
    let scale = peak.max(GRADIENT_GUARD);
    let dims = vec![shape.0, shape.1];
    Ok(GradientImage {
        normalized: Signal::new(dims.clone(), mag.iter().map(|m| m / scale).collect())?,
        magnitude: Signal::new(dims.clone(), mag)?,
        d_row: Signal::new(dims.clone(), d_row)?,
        d_col: Signal::new(dims, d_col)?,
    })
}

/// Renders the gradient image of a checkpoint to `<dir>/gradient.pgm` when `out` is given.
pub fn task_gradient_image(
    config: &MlpConfig,
    params: &MlpParams,
    shape: (usize, usize),
    out: Option<&RunDir>,
) -> Result<GradientImage> {
    let g = gradient_image(config, params, shape)?;
    if let Some(dir) = out {
        dir.write_image("gradient.pgm", &g.display()?)?;
    }
    Ok(g)
}

#[derive(Debug, Clone)]
pub struct SuperResolution {
    pub srf: usize,
    pub prediction: Signal,
    pub truth: Signal,
    pub snapshot: MetricSnapshot,
}

/// Dense side length whose align-corners grid contains every base sample.
pub fn superres_side(base: usize, srf: usize) -> usize {
    srf * (base - 1) + 1
}

/// Queries a base-resolution network on an `srf`-times denser grid and scores
/// it against `source` resized to that grid.
pub fn superresolve(
    config: &MlpConfig,
    params: &MlpParams,
    base: (usize, usize),
    srf: usize,
    source: &Signal,
) -> Result<SuperResolution> {
    if ![2, 4, 8].contains(&srf) {
        return Err(Error::InvalidArgument(format!(
            "super-resolution factor must be 2, 4 or 8, got {srf}"
        )));
    }
    let dense = (superres_side(base.0, srf), superres_side(base.1, srf));
    let grid = uniform_grid(&[dense.0, dense.1], UNIT_BOUNDS)?;
    let pred = predict(params, config, grid.coords())?;
    let prediction = Signal::from_column(vec![dense.0, dense.1], &pred)?;
    let truth = bilinear_resize(source, dense)?;
    let err = mse(prediction.values(), truth.values())?;
    let rho = rho_ag_signals(prediction.values(), truth.values(), prediction.shape()).ok();
    Ok(SuperResolution {
        srf,
        prediction,
        truth,
        snapshot: MetricSnapshot::new(0, err, rho),
    })
}

/// Trains on `source` resized to `base × base`, then super-resolves by `srf`.
pub fn task_superresolve(
    source: &Signal,
    base: usize,
    srf: usize,
    cfg: &TaskConfig,
) -> Result<(TaskRun, SuperResolution)> {
    if ![2, 4, 8].contains(&srf) {
        return Err(Error::InvalidArgument(format!(
            "super-resolution factor must be 2, 4 or 8, got {srf}"
        )));
    }
    if source.dims() != 2 || base < 2 {
        return Err(Error::InvalidArgument("super-resolution needs a 2D source and base ≥ 2".into()));
    }
    let base_image = if source.shape() == [base, base] {
        source.clone()
    } else {
        bilinear_resize(source, (base, base))?
    };
    check_image(&base_image, cfg.paper_scale)?;
    let grid = uniform_grid(&[base, base], UNIT_BOUNDS)?;
    let run = run_fit(
        "superres",
        cfg,
        Domain::Image,
        &grid,
        &base_image,
        &[25, 100],
        json!({ "base": base, "srf": srf, "source_shape": source.shape() }),
        &mut |_, _, _| Ok(()),
    )?;
    let sr = superresolve(&run.config, run.best_params(), (base, base), srf, source)?;
    let snapshot = MetricSnapshot {
        step: run.outcome.report.steps,
        ..sr.snapshot
    };
    let sr = SuperResolution { snapshot, ..sr };
    if let Some(dir) = &run.run_dir {
        dir.write_image(&format!("superres_x{srf}.pgm"), &sr.prediction)?;
        dir.write_image(&format!("truth_x{srf}.pgm"), &sr.truth)?;
        dir.write_text(
            "superres.csv",
            &format!("{}\n{}\n", MetricSnapshot::CSV_HEADER, sr.snapshot.csv_row()),
        )?;
        append_details(&run, "superres", json!(sr.snapshot))?;
    }
    Ok((run, sr))
}

/// One fit per damping on the same image and seed.
#[derive(Debug, Clone)]
pub struct AblationRun {
    pub steps: usize,
    pub curves: Vec<(DampingKind, Vec<f64>)>,
    /// Error text for runs that stopped early.
    pub failures: Vec<(DampingKind, String)>,
}

impl AblationRun {
    /// Loss entering update `step`; diverged runs count as `+inf` past their last step.
    pub fn loss_at(&self, damping: DampingKind, step: usize) -> Option<f64> {
        let (_, curve) = self.curves.iter().find(|(d, _)| *d == damping)?;
        Some(curve.get(step.checked_sub(1)?).copied().unwrap_or(f64::INFINITY))
    }

    /// Lowest loss over the first `step` updates, i.e. the loss of the
    /// parameters a run stopped at `step` would keep.
    pub fn best_upto(&self, damping: DampingKind, step: usize) -> Option<f64> {
        if step == 0 {
            return None;
        }
        (1..=step).map(|s| self.loss_at(damping, s)).try_fold(f64::INFINITY, |m, l| Some(m.min(l?)))
    }

    /// `step,<damping>...` with log₁₀ losses.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step");
        for (d, _) in &self.curves {
            out.push(',');
            out.push_str(d.name());
        }
        out.push('\n');
        for step in 1..=self.steps {
            out.push_str(&step.to_string());
            for (d, _) in &self.curves {
                let v = self.loss_at(*d, step).expect("listed").log10();
                out.push(',');
                out.push_str(&format_value(Some(v)));
            }
            out.push('\n');
        }
        out
    }
}

pub fn task_ablate_delta(image: &Signal, deltas: &[DampingKind], cfg: &TaskConfig) -> Result<AblationRun> {
    check_image(image, cfg.paper_scale)?;
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("no dampings to compare".into()));
    }
    let grid = uniform_grid(image.shape(), UNIT_BOUNDS)?;
    let mut run = AblationRun {
        steps: cfg.steps,
        curves: Vec::new(),
        failures: Vec::new(),
    };
    let sub = TaskConfig {
        out_dir: cfg.out_dir.as_ref().map(|d| d.join("ablate")),
        ..cfg.clone()
    };
    for &d in deltas {
        let one = sub.with_arch(Architecture::Spder(Some(d)));
        match run_fit(
            "runs",
            &one,
            Domain::Image,
            &grid,
            image,
            &DEFAULT_CHECKPOINTS,
            json!({ "ablation": d.name() }),
            &mut |_, _, _| Ok(()),
        ) {
            Ok(r) => run.curves.push((d, r.outcome.report.loss_curve)),
            Err(f) if f.error.is_numeric() => {
                log::warn!("damping {d} stopped early: {}", f.error);
                run.failures.push((d, f.error.to_string()));
                run.curves.push((d, f.partial_losses));
            }
            Err(f) => return Err(f.error),
        }
    }
    if let Some(root) = &cfg.out_dir {
        let dir = RunDir::create(root, "ablate", "summary")?;
        dir.write_text("ablation.csv", &run.to_csv())?;
    }
    Ok(run)
}
