use serde_json::json;

use super::{append_details, run_fit, Domain, TaskConfig, TaskRun};
use crate::error::{Error, Result};
use crate::io::{write_frame_dir, GrayImage};
use crate::metrics::mse;
use crate::network::{predict, MlpConfig, MlpParams};
use crate::optim::DEFAULT_CHECKPOINTS;
use crate::signal::{uniform_grid, Signal, UNIT_BOUNDS};

/// Largest frames×height×width the desk preset accepts.
pub const VIDEO_DESK_MAX_POINTS: usize = 16 * 32 * 32;
const VIDEO_FULL_MAX_POINTS: usize = 300 * 256 * 256;

fn frames_of(video: &Signal) -> Result<Vec<GrayImage>> {
    let [f, h, w] = video.shape()[..] else {
        return Err(Error::InvalidShape(format!("expected frames×rows×cols, got {:?}", video.shape())));
    };
    let size = h * w;
    (0..f)
        .map(|i| {
            let frame = Signal::new(vec![h, w], video.values()[i * size..(i + 1) * size].to_vec())?;
            GrayImage::from_signal(&frame)
        })
        .collect()
}

/// Fits a `(frames, rows, cols)` stack on a 3D grid ordered frame, row, col.
pub fn task_video_fit(video: &Signal, cfg: &TaskConfig) -> Result<TaskRun> {
    if video.dims() != 3 {
        return Err(Error::InvalidShape(format!("expected frames×rows×cols, got {:?}", video.shape())));
    }
    let cap = if cfg.paper_scale {
        VIDEO_FULL_MAX_POINTS
    } else {
        VIDEO_DESK_MAX_POINTS
    };
    if video.len() > cap {
        return Err(Error::InvalidArgument(format!(
            "video of {} samples exceeds the {cap}-sample limit; crop or resize it, or use --paper-scale with the full preset",
            video.len()
        )));
    }
    let grid = uniform_grid(video.shape(), UNIT_BOUNDS)?;
    let run = run_fit(
        "video",
        cfg,
        Domain::Video,
        &grid,
        video,
        &DEFAULT_CHECKPOINTS,
        json!({ "video_shape": video.shape() }),
        &mut |_, _, _| Ok(()),
    )?;
    if let Some(dir) = &run.run_dir {
        write_frame_dir(&frames_of(&run.reconstruction)?, dir.file("frames"))?;
        let interp = frame_interpolate(&run.config, run.best_params(), video.shape())?;
        write_frame_dir(&frames_of(&interp)?, dir.file("interpolated"))?;
        append_details(&run, "frame_interpolation", json!({ "frames": interp.shape()[0] }))?;
    }
    Ok(run)
}

/// Queries a video network at twice the frame density. The result has
/// `2F − 1` frames: even indices are the training frames, odd ones lie halfway
/// between them.
pub fn frame_interpolate(config: &MlpConfig, params: &MlpParams, shape: &[usize]) -> Result<Signal> {
    let [f, h, w] = shape[..] else {
        return Err(Error::InvalidShape(format!("expected frames×rows×cols, got {shape:?}")));
    };
    if config.in_dim != 3 {
        return Err(Error::Shape {
            op: "frame interpolation",
            left: (config.in_dim, config.out_dim),
            right: (3, 1),
        });
    }
    let dense = vec![2 * f - 1, h, w];
    let grid = uniform_grid(&dense, UNIT_BOUNDS)?;
    let pred = predict(params, config, grid.coords())?;
    Signal::from_column(dense, &pred)
}

/// MSE between the odd (in-between) frames of an interpolation and `reference` frames.
pub fn interpolated_frame_mse(interp: &Signal, reference: &Signal) -> Result<f64> {
    let [f2, h, w] = interp.shape()[..] else {
        return Err(Error::InvalidShape("expected a 3D interpolation".into()));
    };
    let size = h * w;
    let odd: Vec<f64> = (1..f2)
        .step_by(2)
        .flat_map(|i| interp.values()[i * size..(i + 1) * size].iter().copied())
        .collect();
    mse(&odd, reference.values())
}
