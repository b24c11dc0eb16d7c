//! Acceptance suite. Every test prints one `criterion N: PASS|FAIL` line.
//!
//! Training criteria run at desk scale on the bundled fixtures; their
//! thresholds are pinned below.

use std::path::PathBuf;
use std::time::Duration;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spder::activations::{stationary_values, ActivationSpec, DampingKind};
use spder::encoding::EncodingSpec;
use spder::io::{read_pgm, read_wav};
use spder::metrics::{mse_8bit, psnr_from_mse};
use spder::network::{backward, forward, init_mlp, predict, MlpConfig, MlpParams};
use spder::signal::Signal;
use spder::spectral::{dft_complex, fft_1d, fft_2d, fourier_gradient_2d};
use spder::tasks::{
    task_ablate_delta, task_audio_fit, task_audio_interpolate, task_image_fit, task_superresolve,
    Architecture, TaskConfig, TaskRun,
};
use spder::tensor::Matrix;

const GRAD_CHECK_TOL: f64 = 1e-4;
const GRAD_CHECK_NETS: u64 = 20;
const GRAD_CHECK_BUDGET: Duration = Duration::from_secs(30);
const FFT_ABS_TOL: f64 = 1e-9;
const PARSEVAL_REL_TOL: f64 = 1e-9;
const FFT_BUDGET: Duration = Duration::from_secs(10);
const STATIONARY_TOL: f64 = 0.01;
const FOURIER_GRADIENT_REL_TOL: f64 = 0.05;
const FOURIER_GRADIENT_ENERGY_SHARE: f64 = 0.01;
const TABLE1_STEPS: usize = 500;
const TABLE1_BUDGET: Duration = Duration::from_secs(600);
const ABLATION_STEPS: usize = 250;
const ABLATION_BAD_FACTOR: f64 = 10.0;
const SUPERRES_STEPS: usize = 100;
const SUPERRES_MARGIN_DB: f64 = 3.0;
const AUDIO_STEPS: usize = 1000;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn image(name: &str) -> Signal {
    read_pgm(fixture(name)).unwrap().to_signal().unwrap()
}

fn clip(name: &str) -> (Signal, u32) {
    let wav = read_wav(fixture(name)).unwrap();
    (wav.to_signal().unwrap(), wav.sample_rate)
}

fn verdict(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

/// CPU time consumed by the calling thread. Training is single-threaded, so
/// this is the CPU cost of the work done in the test body.
fn thread_cpu_time() -> Duration {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: clock_gettime only writes into the provided timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    assert_eq!(rc, 0, "clock_gettime failed");
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

fn run(arch: Architecture, steps: usize) -> TaskConfig {
    TaskConfig::new(arch, steps).with_seed(0)
}

/// Lowest loss seen while entering updates `1..=step`, i.e. the error of the
/// representation kept after `step` steps.
fn best_upto(run: &TaskRun, step: usize) -> f64 {
    run.outcome.report.loss_curve[..step]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------- 1

fn fd_mse(params: &MlpParams, cfg: &MlpConfig, x: &Matrix, t: &[f64]) -> f64 {
    let y = predict(params, cfg, x).unwrap();
    y.data().iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / t.len() as f64
}

fn bump(params: &MlpParams, layer: usize, k: usize, delta: f64) -> MlpParams {
    let mut p = params.clone();
    let l = &mut p.layers[layer];
    let nw = l.weight.data().len();
    if k < nw {
        let mut w = l.weight.clone().into_data();
        w[k] += delta;
        l.weight = Matrix::new(l.weight.rows(), l.weight.cols(), w).unwrap();
    } else {
        l.bias[k - nw] += delta;
    }
    p
}

#[test]
fn criterion_01_gradient_check() {
    let start = std::time::Instant::now();
    let mut activations = vec![("relu".to_string(), ActivationSpec::relu())];
    for d in DampingKind::ALL {
        activations.push((format!("spder:{d}"), ActivationSpec::spder(d)));
    }
    let encodings = [
        ("none", EncodingSpec::None),
        ("pe", EncodingSpec::positional()),
        ("ffn", EncodingSpec::fourier_features(3)),
    ];
    let mut worst = (0.0f64, String::new());
    let mut checked = 0usize;
    for (aname, act) in &activations {
        for (ename, enc) in &encodings {
            for seed in 0..GRAD_CHECK_NETS {
                let depth = 2 + (seed % 2) as usize;
                let width = if seed % 3 == 0 { 16 } else { 8 };
                let cfg = MlpConfig::new(2, 1, *act)
                    .with_shape(depth, width)
                    .with_encoding(enc.clone())
                    .with_seed(seed);
                let params = init_mlp(&cfg).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                let x = Matrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
                let t: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
                let (y, cache) = forward(&params, &cfg, &x).unwrap();
                let d_out = Matrix::from_fn(6, 1, |r, _| 2.0 * (y.get(r, 0) - t[r]) / 6.0);
                let grads = backward(&params, &cfg, &cache, &d_out).unwrap();
                // Log, sqrt and ReLU are non-smooth at a zero pre-activation, so
                // the step must stay well inside the nearest unit's distance to 0.
                let nearest = cache.pre[..depth - 1]
                    .iter()
                    .flat_map(|z| z.data().iter())
                    .fold(f64::INFINITY, |m, z| m.min(z.abs()));
                let h = (1e-2 * nearest).clamp(1e-8, 1e-6);
                // entries far below the network's gradient scale are compared
                // against that scale instead of their own size
                let floor = 1e-6 * grads.tensors().flatten().fold(1.0f64, |m, g| m.max(g.abs()));
                for (li, gl) in grads.layers.iter().enumerate() {
                    let analytic: Vec<f64> = gl.weight.data().iter().chain(&gl.bias).copied().collect();
                    for (k, &an) in analytic.iter().enumerate() {
                        let at = |d: f64| fd_mse(&bump(&params, li, k, d), &cfg, &x, &t);
                        let fd = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
                        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(floor);
                        checked += 1;
                        if rel > worst.0 {
                            worst = (rel, format!("{aname}/{ename} seed {seed} layer {li} #{k}: fd {fd:e} vs {an:e}"));
                        }
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        worst.0 < GRAD_CHECK_TOL && elapsed < GRAD_CHECK_BUDGET,
        &format!(
            "{checked} gradients, worst rel err {:.2e} at {}, {:.1}s",
            worst.0,
            worst.1,
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- 2

fn naive_2d(values: &[f64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); rows * cols];
    for u in 0..rows {
        for v in 0..cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for x in 0..rows {
                for y in 0..cols {
                    let phase = -std::f64::consts::TAU * ((u * x) as f64 / rows as f64 + (v * y) as f64 / cols as f64);
                    acc += values[x * cols + y] * Complex64::from_polar(1.0, phase);
                }
            }
            out[u * cols + v] = acc / (rows * cols) as f64;
        }
    }
    out
}

#[test]
fn criterion_02_fft_oracle() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut max_err, mut max_parseval) = (0.0f64, 0.0f64);
    for i in 0..50 {
        let n = if i < 5 { [1, 2, 240, 128, 239][i] } else { rng.random_range(1..=240) };
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = fft_1d(&x);
        let complex: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let oracle = dft_complex(&complex, false);
        for (a, b) in spec.values.iter().zip(&oracle) {
            max_err = max_err.max((a - b).norm());
        }
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = spec.values.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
        max_parseval = max_parseval.max((time - freq).abs() / time.max(f64::MIN_POSITIVE));

        let (r, c) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let img: Vec<f64> = (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = fft_2d(&img, r, c).unwrap();
        for (a, b) in spec.values.iter().zip(naive_2d(&img, r, c)) {
            max_err = max_err.max((a - b).norm());
        }
        let time: f64 = img.iter().map(|v| v * v).sum();
        let freq: f64 = spec.values.iter().map(|c| c.norm_sqr()).sum::<f64>() * (r * c) as f64;
        max_parseval = max_parseval.max((time - freq).abs() / time.max(f64::MIN_POSITIVE));
    }
    let elapsed = start.elapsed();
    verdict(
        2,
        max_err < FFT_ABS_TOL && max_parseval < PARSEVAL_REL_TOL && elapsed < FFT_BUDGET,
        &format!(
            "max abs err {max_err:.2e}, Parseval rel err {max_parseval:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- 3

#[test]
fn criterion_03_stationary_points() {
    let mags = |d: DampingKind, lo: f64, hi: f64| -> Vec<f64> {
        stationary_values(d, 1.0, lo, hi)
            .iter()
            .map(|p| p.y.abs())
            .filter(|y| *y > 1e-6)
            .collect()
    };
    let close = |got: &[f64], want: &[f64]| {
        got.len() >= want.len() && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= STATIONARY_TOL)
    };
    let sqrt = mags(DampingKind::SqrtAbs, 0.0, 12.0);
    let log = mags(DampingKind::LogAbs, 0.01, 8.0);
    let atan = mags(DampingKind::Arctan, 0.0, 4.0);
    let pass = close(&sqrt, &[1.31, 2.18, 2.81, 3.31]) && close(&log, &[0.36, 0.64, 1.56, 2.06]) && close(&atan, &[1.04]);
    verdict(
        3,
        pass,
        &format!("sqrt {sqrt:.3?}, log {log:.3?}, arctan first {:.3?}", atan.first()),
    );
}

// ---------------------------------------------------------------- 4

#[test]
fn criterion_04_fourier_gradient_identity() {
    let img = image("cosine64.pgm");
    let (rows, cols) = (img.shape()[0], img.shape()[1]);
    let v = img.values();
    let spec = fft_2d(v, rows, cols).unwrap();
    let mut worst = 0.0f64;
    let mut bins = 0;
    for axis in 0..2 {
        // periodic central difference in samples along `axis`
        let fd: Vec<f64> = (0..rows * cols)
            .map(|i| {
                let (r, c) = (i / cols, i % cols);
                let (a, b) = if axis == 0 {
                    (((r + 1) % rows) * cols + c, ((r + rows - 1) % rows) * cols + c)
                } else {
                    (r * cols + (c + 1) % cols, r * cols + (c + cols - 1) % cols)
                };
                0.5 * (v[a] - v[b])
            })
            .collect();
        let fd_spec = fft_2d(&fd, rows, cols).unwrap();
        let ideal = fourier_gradient_2d(&spec, axis).unwrap();
        let energy: f64 = ideal.values.iter().map(|c| c.norm_sqr()).sum();
        for (got, want) in fd_spec.values.iter().zip(&ideal.values) {
            if want.norm_sqr() >= FOURIER_GRADIENT_ENERGY_SHARE * energy {
                bins += 1;
                worst = worst.max((got - want).norm() / want.norm());
            }
        }
    }
    verdict(
        4,
        bins > 0 && worst < FOURIER_GRADIENT_REL_TOL,
        &format!("{bins} dominant bins, worst rel err {worst:.4}"),
    );
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_05_table1_trend() {
    let img = image("natural64.pgm");
    let cpu0 = thread_cpu_time();
    let fit = |arch: &str| task_image_fit(&img, &run(arch.parse().unwrap(), TABLE1_STEPS)).unwrap();
    let spder = fit("spder:sqrtabs");
    let siren = fit("siren");
    let pe = fit("relu_pe");
    let relu = fit("relu");
    let cpu = thread_cpu_time() - cpu0;
    let loss = |r: &TaskRun| r.outcome.report.best_loss;
    let rho = |r: &TaskRun| r.outcome.report.final_rho.unwrap_or(f64::NAN);
    let ordering = loss(&spder) <= loss(&siren) / 100.0 && loss(&siren) / 100.0 <= loss(&pe) / 10.0;
    let spectra = rho(&spder) > 0.999 && 0.999 > rho(&relu);
    verdict(
        5,
        ordering && spectra && cpu < TABLE1_BUDGET,
        &format!(
            "loss spder {:.2e} siren {:.2e} relu_pe {:.2e} relu {:.2e}; rho spder {:.6} relu {:.6}; cpu {:.0}s",
            loss(&spder),
            loss(&siren),
            loss(&pe),
            loss(&relu),
            rho(&spder),
            rho(&relu),
            cpu.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- 6

/// Bundled natural image the damping comparison runs on.
const ABLATION_IMAGE: &str = "natural128.pgm";

#[test]
fn criterion_06_damping_ablation() {
    let img = image(ABLATION_IMAGE);
    let abl = task_ablate_delta(&img, &DampingKind::ALL, &run(Architecture::Spder(None), ABLATION_STEPS)).unwrap();
    // runs keep their lowest-loss parameters, so score what a 250-step run keeps
    let at = |d| abl.best_upto(d, ABLATION_STEPS).unwrap();
    use DampingKind::*;
    let ordered = at(SqrtAbs) < at(LogAbs) && at(LogAbs) < at(Arctan) && at(Arctan) < at(Const1);
    let bad = at(Identity) >= ABLATION_BAD_FACTOR * at(Const1) && at(Square) >= ABLATION_BAD_FACTOR * at(Const1);
    let detail = DampingKind::ALL
        .iter()
        .map(|d| format!("{d} {:.2e}", at(*d)))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(6, ordered && bad, &format!("step {ABLATION_STEPS} on {ABLATION_IMAGE}: {detail}"));
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_07_psnr_algebra() {
    let psnr = psnr_from_mse(4e-4);
    let pixels = mse_8bit(6.7e-8);
    verdict(
        7,
        (psnr - 40.0).abs() <= 1e-9 && (0.00105..=0.00115).contains(&pixels),
        &format!("psnr(4e-4) = {psnr} dB, mse_8bit(6.7e-8) = {pixels:.6}"),
    );
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_08_superresolution() {
    let mut lines = Vec::new();
    let mut wins = 0;
    for name in ["natural128.pgm", "natural_b128.pgm"] {
        let src = image(name);
        let sr = |arch: &str| {
            task_superresolve(&src, 64, 2, &run(arch.parse().unwrap(), SUPERRES_STEPS))
                .unwrap()
                .1
                .snapshot
                .psnr_db
        };
        let (s, b) = (sr("spder:sqrtabs"), sr("siren"));
        if s - b >= SUPERRES_MARGIN_DB {
            wins += 1;
        }
        lines.push(format!("{name}: spder {s:.2} dB, siren {b:.2} dB"));
    }
    verdict(8, wins == 2, &lines.join("; "));
}

// ---------------------------------------------------------------- 9

#[test]
fn criterion_09_audio_trend() {
    let mut pass = true;
    let mut lines = Vec::new();
    for name in ["tone440.wav", "chirp.wav"] {
        let (signal, rate) = clip(name);
        let spder = task_audio_fit(&signal, rate, &run(Architecture::Spder(Some(DampingKind::Arctan)), AUDIO_STEPS)).unwrap();
        let siren = task_audio_fit(&signal, rate, &run(Architecture::Siren, AUDIO_STEPS)).unwrap();
        for step in [500, 1000] {
            let (a, b) = (best_upto(&spder, step), best_upto(&siren, step));
            pass &= a < b;
            lines.push(format!("{name}@{step}: spder {a:.2e} siren {b:.2e}"));
        }
        let interp = task_audio_interpolate(&signal, rate, &run(Architecture::Spder(Some(DampingKind::Arctan)), 250)).unwrap();
        let m: Vec<f64> = interp.rows.iter().map(|r| r.1).collect();
        pass &= m.windows(2).all(|w| w[0] <= w[1]);
        let m_text: Vec<String> = m.iter().map(|v| format!("{v:.2e}")).collect();
        lines.push(format!("{name} uf2/4/8: {}", m_text.join(" ")));
    }
    verdict(9, pass, &lines.join("; "));
}

// ---------------------------------------------------------------- 10

#[test]
fn criterion_10_determinism() {
    let img = image("natural64.pgm");
    let (signal, rate) = clip("pluck.wav");
    let mut lines = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path();
        let cfg = run(Architecture::Spder(None), 30).with_out_dir(out);
        task_image_fit(&img, &cfg).unwrap();
        task_audio_interpolate(&signal, rate, &cfg.with_arch(Architecture::ReluFfn)).unwrap();
        let a = std::fs::read(out.join("fit/spder_sqrtabs/report.csv")).unwrap();
        let b = std::fs::read(out.join("audio-interp/relu_ffn/report.csv")).unwrap();
        lines.push((a, b));
    }
    let identical = lines[0] == lines[1];
    verdict(
        10,
        identical,
        &format!("report.csv bytes identical across two runs: {identical}"),
    );
}
