use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use spder::activations::DampingKind;
use spder::checkpoint::load_checkpoint;
use spder::io::{read_frame_dir, read_pgm, read_wav};
use spder::metrics::mse;
use spder::signal::Signal;
use spder::spectral::rho_ag_signals;
use spder::tasks::{
    self, spectrum_csv, Architecture, RunDir, Summary, TaskConfig,
};
use spder::Error;

#[derive(Parser, Debug)]
#[command(name = "spder", version, about = "Fit and probe coordinate networks on images, audio and video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// relu, relu_pe, relu_ffn, siren, spder or spder:<damping>
    #[arg(long, default_value = "spder")]
    preset: Architecture,
    /// Training steps (each task has its own default)
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Root of the output tree
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Use the full-size presets and resolution limits
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one grayscale PGM image
    Fit {
        #[arg(long)]
        image: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train at a base resolution and query a denser grid
    Superres {
        #[arg(long)]
        image: PathBuf,
        /// Super-resolution factor: 2, 4 or 8
        #[arg(long, default_value_t = 2)]
        srf: usize,
        /// Training side length
        #[arg(long, default_value_t = 64)]
        base: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Render the input-gradient magnitude of a trained image checkpoint
    Grad {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Reference image; sets the grid size and scores the reconstruction
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Fit a PCM16 WAV clip
    Audio {
        #[arg(long)]
        audio: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train on an 8x-decimated clip and score upsampling factors 2, 4 and 8
    AudioInterp {
        #[arg(long)]
        audio: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a directory of numbered PGM frames and interpolate between them
    Video {
        #[arg(long)]
        frames: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare damping functions on one image
    Ablate {
        #[arg(long)]
        image: PathBuf,
        /// Comma-separated dampings (default: all)
        #[arg(long, value_delimiter = ',')]
        deltas: Vec<DampingKind>,
        #[command(flatten)]
        common: Common,
    },
    /// Write the amplitude spectrum of an image or clip
    Spectrum {
        #[arg(long, conflicts_with = "audio", required_unless_present = "audio")]
        image: Option<PathBuf>,
        #[arg(long)]
        audio: Option<PathBuf>,
        /// Signal of the same kind and size to compare against
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
}

/// A failure before any work started, reported with the usage text.
struct UsageError(String);

enum Failure {
    Usage(UsageError),
    Task(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Task(e)
    }
}

fn require(path: &Path) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Usage(UsageError(format!(
            "input path '{}' does not exist",
            path.display()
        ))))
    }
}

fn load_image(path: &Path) -> Result<Signal, Failure> {
    require(path)?;
    Ok(read_pgm(path)?.to_signal()?)
}

fn load_audio(path: &Path) -> Result<(Signal, u32), Failure> {
    require(path)?;
    let wav = read_wav(path)?;
    Ok((wav.to_signal()?, wav.sample_rate))
}

fn load_video(dir: &Path) -> Result<Signal, Failure> {
    require(dir)?;
    let frames = read_frame_dir(dir)?;
    let (w, h) = (frames[0].width, frames[0].height);
    let mut values = Vec::with_capacity(frames.len() * w * h);
    for f in &frames {
        values.extend_from_slice(f.to_signal()?.values());
    }
    Ok(Signal::new(vec![frames.len(), h, w], values)?)
}

fn task_config(common: &Common, default_steps: usize, inputs: Vec<PathBuf>) -> TaskConfig {
    let mut cfg = TaskConfig::new(common.preset, common.steps.unwrap_or(default_steps))
        .with_seed(common.seed)
        .with_out_dir(&common.out);
    cfg.paper_scale = common.paper_scale;
    cfg.command_line = std::env::args().collect();
    cfg.inputs = inputs;
    cfg
}

fn run(command: Command) -> Result<Summary, Failure> {
    Ok(match command {
        Command::Fit { image, common } => {
            let signal = load_image(&image)?;
            tasks::task_image_fit(&signal, &task_config(&common, 500, vec![image]))?.summary()
        }
        Command::Superres {
            image,
            srf,
            base,
            common,
        } => {
            let signal = load_image(&image)?;
            let cfg = task_config(&common, 100, vec![image]);
            let (_, sr) = tasks::task_superresolve(&signal, base, srf, &cfg)?;
            Summary::new(sr.snapshot.step, sr.snapshot.mse, sr.snapshot.rho_ag)
        }
        Command::Grad {
            checkpoint,
            image,
            height,
            width,
            out,
        } => {
            require(&checkpoint)?;
            let (config, params) = load_checkpoint(&checkpoint)?;
            let reference = image.as_deref().map(load_image).transpose()?;
            let shape = match &reference {
                Some(r) => (r.shape()[0], r.shape()[1]),
                None => (height, width),
            };
            let dir = RunDir::create(&out, "grad", &checkpoint_label(&checkpoint))?;
            tasks::task_gradient_image(&config, &params, shape, Some(&dir))?;
            match reference {
                Some(r) => {
                    let grid = spder::signal::uniform_grid(r.shape(), spder::signal::UNIT_BOUNDS)?;
                    let pred = spder::network::predict(&params, &config, grid.coords())?;
                    let rho = rho_ag_signals(pred.data(), r.values(), r.shape()).ok();
                    Summary::new(0, mse(pred.data(), r.values())?, rho)
                }
                None => Summary::new(0, f64::NAN, None),
            }
        }
        Command::Audio { audio, common } => {
            let (clip, rate) = load_audio(&audio)?;
            tasks::task_audio_fit(&clip, rate, &task_config(&common, 1000, vec![audio]))?.summary()
        }
        Command::AudioInterp { audio, common } => {
            let (clip, rate) = load_audio(&audio)?;
            let out = tasks::task_audio_interpolate(&clip, rate, &task_config(&common, 250, vec![audio]))?;
            for (uf, m) in &out.rows {
                log::info!("uf={uf} mse={m:e}");
            }
            out.run.summary()
        }
        Command::Video { frames, common } => {
            let video = load_video(&frames)?;
            tasks::task_video_fit(&video, &task_config(&common, 400, vec![frames]))?.summary()
        }
        Command::Ablate {
            image,
            deltas,
            common,
        } => {
            let signal = load_image(&image)?;
            let deltas = if deltas.is_empty() {
                DampingKind::ALL.to_vec()
            } else {
                deltas
            };
            let cfg = task_config(&common, 250, vec![image]);
            let abl = tasks::task_ablate_delta(&signal, &deltas, &cfg)?;
            for (d, msg) in &abl.failures {
                eprintln!("warning: damping {d} stopped early: {msg}");
            }
            let (best, loss) = deltas
                .iter()
                .filter_map(|d| abl.loss_at(*d, abl.steps).map(|l| (*d, l)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("at least one damping");
            log::info!("lowest final loss: {best}");
            Summary::new(abl.steps, loss, None)
        }
        Command::Spectrum {
            image,
            audio,
            reference,
            out,
        } => {
            let (signal, path) = match (image, audio) {
                (Some(p), _) => (load_image(&p)?, p),
                (None, Some(p)) => (load_audio(&p)?.0, p),
                (None, None) => unreachable!("clap requires one input"),
            };
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let dir = RunDir::create(&out, "spectrum", &stem)?;
            dir.write_text("spectrum.csv", &spectrum_csv(&signal)?)?;
            match reference {
                Some(r) => {
                    let other = if signal.dims() == 2 {
                        load_image(&r)?
                    } else {
                        load_audio(&r)?.0
                    };
                    if other.shape() != signal.shape() {
                        return Err(Failure::Task(Error::InvalidShape(format!(
                            "reference shape {:?} differs from input shape {:?}",
                            other.shape(),
                            signal.shape()
                        ))));
                    }
                    let rho = rho_ag_signals(signal.values(), other.values(), signal.shape()).ok();
                    Summary::new(0, mse(signal.values(), other.values())?, rho)
                }
                None => Summary::new(0, f64::NAN, None),
            }
        }
    })
}

fn checkpoint_label(path: &Path) -> String {
    // runs/<task>/<preset>/checkpoint.spdr -> <preset>
    path.parent()
        .and_then(|p| p.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "checkpoint".into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help and version go to stdout with status 0; everything else is a usage error
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            println!("{}", summary.line());
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(UsageError(msg))) => {
            eprintln!("error: {msg}\n");
            eprintln!("{}", Cli::command().render_usage());
            ExitCode::from(2)
        }
        Err(Failure::Task(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Bad arguments caught by a task are usage errors; everything else,
/// numeric failures included, is a task failure.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}
