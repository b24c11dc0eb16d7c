use serde_json::json;

use super::{append_details, run_fit, Domain, RunDir, TaskConfig, TaskRun};
use crate::error::{Error, Result};
use crate::io::write_wav;
use crate::metrics::{format_value, mse};
use crate::network::predict;
use crate::optim::DEFAULT_CHECKPOINTS;
use crate::signal::{downsample_1d, make_grid, Signal};

/// Upsampling factors relative to the 8×-decimated training clip.
pub const UF_FACTORS: [usize; 3] = [2, 4, 8];
const TRAIN_DECIMATION: usize = 8;

fn check_clip(clip: &Signal) -> Result<()> {
    if clip.dims() != 1 {
        return Err(Error::InvalidShape(format!(
            "audio must be 1D, got shape {:?}",
            clip.shape()
        )));
    }
    Ok(())
}

/// Fits a clip on a `[-100, 100]` grid.
pub fn task_audio_fit(clip: &Signal, sample_rate: u32, cfg: &TaskConfig) -> Result<TaskRun> {
    check_clip(clip)?;
    let grid = make_grid(clip.shape(), &[super::presets::preset(Domain::Audio, cfg.paper_scale).bounds])?;
    let run = run_fit(
        "audio",
        cfg,
        Domain::Audio,
        &grid,
        clip,
        &DEFAULT_CHECKPOINTS,
        json!({ "samples": clip.len(), "sample_rate": sample_rate }),
        &mut |_, _, _| Ok(()),
    )?;
    if let Some(dir) = &run.run_dir {
        write_wav(&run.reconstruction, sample_rate, dir.file("reconstruction.wav"))?;
        dir.write_text("spectrum.csv", &super::spectrum_csv(&run.reconstruction)?)?;
    }
    Ok(run)
}

#[derive(Debug, Clone)]
pub struct AudioInterpolation {
    pub run: TaskRun,
    /// `(uf, mse)` for each factor in [`UF_FACTORS`].
    pub rows: Vec<(usize, f64)>,
}

impl AudioInterpolation {
    pub fn mse_at(&self, uf: usize) -> Option<f64> {
        self.rows.iter().find(|(u, _)| *u == uf).map(|(_, m)| *m)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("uf,mse\n");
        for (uf, m) in &self.rows {
            out.push_str(&format!("{uf},{}\n", format_value(Some(*m))));
        }
        out
    }
}

/// Trains on every 8th sample, then scores the network against the clip
/// decimated by 4, 2 and 1 (upsampling factors 2, 4 and 8). All evaluation
/// coordinates are points of the full-clip grid.
pub fn task_audio_interpolate(clip: &Signal, sample_rate: u32, cfg: &TaskConfig) -> Result<AudioInterpolation> {
    check_clip(clip)?;
    if clip.len() < 2 * TRAIN_DECIMATION {
        return Err(Error::InvalidArgument(format!(
            "clip of {} samples is too short to decimate by {TRAIN_DECIMATION}",
            clip.len()
        )));
    }
    let full_grid = make_grid(clip.shape(), &[super::presets::preset(Domain::Audio, cfg.paper_scale).bounds])?;
    let train_grid = full_grid.decimate(TRAIN_DECIMATION)?;
    let train = downsample_1d(clip, TRAIN_DECIMATION)?;
    let run = run_fit(
        "audio-interp",
        cfg,
        Domain::Audio,
        &train_grid,
        &train,
        &DEFAULT_CHECKPOINTS,
        json!({ "samples": clip.len(), "sample_rate": sample_rate, "train_decimation": TRAIN_DECIMATION }),
        &mut |_, _, _| Ok(()),
    )?;
    let mut rows = Vec::new();
    let mut predictions = Vec::new();
    for uf in UF_FACTORS {
        let stride = TRAIN_DECIMATION / uf;
        let grid = full_grid.decimate(stride)?;
        let truth = downsample_1d(clip, stride)?;
        let pred = predict(run.best_params(), &run.config, grid.coords())?;
        rows.push((uf, mse(pred.data(), truth.values())?));
        predictions.push((uf, Signal::from_column(vec![grid.len()], &pred)?));
    }
    let out = AudioInterpolation { run, rows };
    if let Some(dir) = &out.run.run_dir {
        write_outputs(dir, &out, &predictions, sample_rate)?;
        append_details(&out.run, "interpolation", json!(out.rows))?;
    }
    Ok(out)
}

fn write_outputs(
    dir: &RunDir,
    out: &AudioInterpolation,
    predictions: &[(usize, Signal)],
    sample_rate: u32,
) -> Result<()> {
    dir.write_text("interpolation.csv", &out.to_csv())?;
    for (uf, sig) in predictions {
        let rate = sample_rate / (TRAIN_DECIMATION / uf) as u32;
        write_wav(sig, rate.max(1), dir.file(&format!("interp_uf{uf}.wav")))?;
    }
    Ok(())
}
