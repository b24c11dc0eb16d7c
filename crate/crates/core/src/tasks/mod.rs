//! End-to-end experiment drivers.
//!
//! Each driver trains on in-memory signals and, when [`TaskConfig::out_dir`]
//! is set, writes `<out>/<task>/<preset>/` with `report.csv`, `meta.json`,
//! `checkpoint.spdr` and task artifacts.

mod audio;
mod image;
pub mod presets;
mod video;

use std::path::{Path, PathBuf};

use serde_json::json;

pub use audio::{task_audio_fit, task_audio_interpolate, AudioInterpolation, UF_FACTORS};
pub use image::{
    gradient_image, superresolve, task_ablate_delta, task_gradient_image, task_image_fit,
    task_superresolve, AblationRun, GradientImage, SuperResolution, GRADIENT_GUARD,
    IMAGE_DESK_MAX_SIDE, IMAGE_FULL_MAX_SIDE,
};
pub use presets::{resolve, Architecture, Domain, Preset};
pub use video::{frame_interpolate, interpolated_frame_mse, task_video_fit, VIDEO_DESK_MAX_POINTS};

use crate::checkpoint::save_checkpoint;
use crate::error::{Error, Result};
use crate::io::{atomic_write, write_pgm, GrayImage, RunManifest};
use crate::metrics::{format_value, psnr_from_mse};
use crate::network::{MlpConfig, MlpParams};
use crate::optim::{fit_with_hook, AdamHyper, FitOutcome, TrainOptions};
use crate::signal::{CoordGrid, Signal};
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfig {
    pub arch: Architecture,
    pub steps: usize,
    pub seed: u64,
    pub paper_scale: bool,
    pub out_dir: Option<PathBuf>,
    /// Recorded in `meta.json`.
    pub command_line: Vec<String>,
    /// Files checksummed into `meta.json`.
    pub inputs: Vec<PathBuf>,
}

impl TaskConfig {
    pub fn new(arch: Architecture, steps: usize) -> Self {
        Self {
            arch,
            steps,
            seed: 0,
            paper_scale: false,
            out_dir: None,
            command_line: Vec::new(),
            inputs: Vec::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_out_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.out_dir = Some(dir.into());
        self
    }

    pub fn with_arch(&self, arch: Architecture) -> Self {
        Self {
            arch,
            ..self.clone()
        }
    }
}

/// The final metric line a task reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub step: usize,
    pub mse: f64,
    pub psnr_db: f64,
    pub rho: Option<f64>,
}

impl Summary {
    pub fn new(step: usize, mse: f64, rho: Option<f64>) -> Self {
        Self {
            step,
            mse,
            psnr_db: psnr_from_mse(mse),
            rho,
        }
    }

    pub fn line(&self) -> String {
        let rho = match self.rho {
            Some(r) => format_value(Some(r)),
            None => "nan".into(),
        };
        format!(
            "step={} mse={} psnr={} rho={}",
            self.step,
            format_value(Some(self.mse)),
            format_value(Some(self.psnr_db)),
            rho
        )
    }
}

/// A finished fit together with the network it was run on.
#[derive(Debug, Clone)]
pub struct TaskRun {
    pub config: MlpConfig,
    pub hyper: AdamHyper,
    pub outcome: FitOutcome,
    /// Prediction of the min-loss parameters on the training grid.
    pub reconstruction: Signal,
    pub run_dir: Option<RunDir>,
}

impl TaskRun {
    pub fn summary(&self) -> Summary {
        let r = &self.outcome.report;
        Summary::new(r.steps, r.best_loss, r.final_rho)
    }

    pub fn best_params(&self) -> &MlpParams {
        &self.outcome.best_params
    }
}

/// Output directory of one task run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path, task: &str, preset: &str) -> Result<Self> {
        let path = root.join(task).join(preset.replace(':', "_"));
        std::fs::create_dir_all(&path).map_err(|e| Error::file(&path, e))?;
        Ok(Self { path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        atomic_write(self.file(name), text.as_bytes())
    }

    pub fn write_image(&self, name: &str, image: &Signal) -> Result<()> {
        write_pgm(&GrayImage::from_signal(image)?, self.file(name))
    }
}

/// A failed task fit, with the losses recorded before the failure.
#[derive(Debug)]
pub(crate) struct TaskFailure {
    pub error: Error,
    pub partial_losses: Vec<f64>,
}

impl From<Error> for TaskFailure {
    fn from(error: Error) -> Self {
        Self {
            error,
            partial_losses: Vec::new(),
        }
    }
}

impl From<TaskFailure> for Error {
    fn from(f: TaskFailure) -> Self {
        f.error
    }
}

/// Trains `arch` on one signal and writes the standard outputs.
///
/// `artifact` runs on each checkpoint prediction when an output directory is set.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_fit(
    task: &str,
    cfg: &TaskConfig,
    domain: Domain,
    grid: &CoordGrid,
    target: &Signal,
    checkpoints: &[usize],
    details: serde_json::Value,
    artifact: &mut dyn FnMut(&RunDir, usize, &Signal) -> Result<()>,
) -> std::result::Result<TaskRun, TaskFailure> {
    let (config, hyper) = resolve(cfg.arch, domain, cfg.paper_scale, grid.dims(), cfg.seed);
    let label = cfg.arch.label(domain);
    let run_dir = match &cfg.out_dir {
        Some(root) => Some(RunDir::create(root, task, &label)?),
        None => None,
    };
    let mut manifest = RunManifest::begin(cfg.command_line.clone(), task, &label, cfg.seed);
    for input in &cfg.inputs {
        manifest.add_input(input)?;
    }
    manifest.details = json!({
        "network": config,
        "adam": hyper,
        "optimizer": "adam (bias-corrected), full batch",
        "steps": cfg.steps,
        "paper_scale": cfg.paper_scale,
        "grid_shape": grid.shape(),
        "grid_bounds": grid.bounds(),
        "task": details,
    });
    if let Some(dir) = &run_dir {
        manifest.write(dir.file("meta.json"))?;
    }

    let options = TrainOptions::new(cfg.steps, hyper).with_checkpoints(checkpoints);
    let params = crate::network::init_mlp(&config)?;
    let shape = target.shape().to_vec();
    let mut hook = |step: usize, pred: &Matrix| -> Result<()> {
        match &run_dir {
            Some(dir) => artifact(dir, step, &Signal::from_column(shape.clone(), pred)?),
            None => Ok(()),
        }
    };
    let result = fit_with_hook(&config, params, grid, target, &options, &mut hook);
    let outcome = match result {
        Ok(o) => o,
        Err(failure) => {
            if let Some(dir) = &run_dir {
                dir.write_text("report.csv", &failure.partial.report.to_csv())?;
                manifest.status = format!("failed: {}", failure.error);
                manifest.wall_ms = Some(failure.partial.report.wall_ms);
                manifest.write(dir.file("meta.json"))?;
            }
            return Err(TaskFailure {
                error: failure.error,
                partial_losses: failure.partial.report.loss_curve,
            });
        }
    };
    let best = crate::network::predict(&outcome.best_params, &config, grid.coords())?;
    let reconstruction = Signal::from_column(target.shape().to_vec(), &best)?;

    if let Some(dir) = &run_dir {
        dir.write_text("report.csv", &outcome.report.to_csv())?;
        save_checkpoint(&config, &outcome.best_params, dir.file("checkpoint.spdr"))?;
        let r = &outcome.report;
        manifest.status = "ok".into();
        manifest.wall_ms = Some(r.wall_ms);
        if let serde_json::Value::Object(map) = &mut manifest.details {
            map.insert(
                "result".into(),
                json!({
                    "final_loss": r.final_loss,
                    "best_loss": r.best_loss,
                    "best_step": r.best_step,
                    "final_rho": r.final_rho,
                    "snapshots": r.snapshots,
                }),
            );
        }
        manifest.write(dir.file("meta.json"))?;
    }
    Ok(TaskRun {
        config,
        hyper,
        outcome,
        reconstruction,
        run_dir,
    })
}

/// Adds task results to an existing `meta.json`.
pub(crate) fn append_details(run: &TaskRun, key: &str, value: serde_json::Value) -> Result<()> {
    let Some(dir) = &run.run_dir else {
        return Ok(());
    };
    let path = dir.file("meta.json");
    let bytes = std::fs::read(&path).map_err(|e| Error::file(&path, e))?;
    let mut manifest: RunManifest = serde_json::from_slice(&bytes)?;
    if let serde_json::Value::Object(map) = &mut manifest.details {
        map.insert(key.to_string(), value);
    }
    manifest.write(path)
}

/// Amplitude spectrum as `index,amplitude` rows (row-major for 2D).
pub fn spectrum_csv(signal: &Signal) -> Result<String> {
    let spec = crate::spectral::amplitude_spectrum(signal.values(), signal.shape())?;
    let mut out = String::from("index,amplitude\n");
    for (i, a) in spec.values.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", format_value(Some(*a))));
    }
    Ok(out)
}
