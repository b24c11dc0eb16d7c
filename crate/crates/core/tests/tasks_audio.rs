use std::f64::consts::TAU;
use std::path::PathBuf;

use spder::activations::DampingKind;
use spder::error::Error;
use spder::io::read_wav;
use spder::signal::Signal;
use spder::tasks::{task_audio_fit, task_audio_interpolate, Architecture, TaskConfig, UF_FACTORS};

const RATE: u32 = 8000;

fn tone(freq: f64, samples: usize, amp: f64) -> Signal {
    let v = (0..samples)
        .map(|i| amp * (TAU * freq * i as f64 / RATE as f64).sin())
        .collect();
    Signal::new(vec![samples], v).unwrap()
}

fn arctan(steps: usize) -> TaskConfig {
    TaskConfig::new(Architecture::Spder(Some(DampingKind::Arctan)), steps)
}

fn bundled(name: &str) -> Signal {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    read_wav(path).unwrap().to_signal().unwrap()
}

#[test]
fn one_second_tone_reaches_high_spectral_similarity() {
    let run = task_audio_fit(&tone(440.0, RATE as usize, 0.5), RATE, &arctan(500)).unwrap();
    let rho = run.outcome.report.final_rho.unwrap();
    assert!(rho > 0.99, "rho {rho}");
}

#[test]
fn silence_is_fit_quickly() {
    let silence = Signal::new(vec![2000], vec![0.0; 2000]).unwrap();
    let run = task_audio_fit(&silence, RATE, &arctan(100)).unwrap();
    assert!(run.outcome.report.best_loss < 1e-8, "{}", run.outcome.report.best_loss);
}

#[test]
fn tone_below_decimated_nyquist_is_recovered() {
    // 8x decimation leaves a 1 kHz rate, so 150 Hz is comfortably representable
    let out = task_audio_interpolate(&tone(150.0, 2000, 0.5), RATE, &arctan(250)).unwrap();
    let uf8 = out.mse_at(8).unwrap();
    assert!(uf8 < 1e-3, "uf8 mse {uf8}");
}

#[test]
fn spder_interpolates_bundled_clips_at_least_as_well_as_siren() {
    for name in ["tone440.wav", "chirp.wav", "pluck.wav"] {
        let clip = bundled(name);
        let s = task_audio_interpolate(&clip, RATE, &arctan(250)).unwrap();
        let b = task_audio_interpolate(&clip, RATE, &TaskConfig::new(Architecture::Siren, 250)).unwrap();
        for uf in UF_FACTORS {
            let (a, c) = (s.mse_at(uf).unwrap(), b.mse_at(uf).unwrap());
            assert!(a <= c, "{name} uf {uf}: spder {a:e} siren {c:e}");
        }
    }
}

#[test]
fn interpolation_table_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let clip = tone(300.0, 400, 0.3);
    let out = task_audio_interpolate(&clip, RATE, &arctan(5).with_out_dir(dir.path())).unwrap();
    let root = dir.path().join("audio-interp/spder_arctan");
    let csv = std::fs::read_to_string(root.join("interpolation.csv")).unwrap();
    assert_eq!(csv, out.to_csv());
    assert_eq!(csv.lines().next(), Some("uf,mse"));
    for uf in UF_FACTORS {
        let wav = read_wav(root.join(format!("interp_uf{uf}.wav"))).unwrap();
        assert_eq!(wav.samples.len(), 400 / (8 / uf));
    }
}

#[test]
fn short_or_multidimensional_clips_are_rejected() {
    let short = tone(100.0, 10, 0.5);
    assert!(matches!(
        task_audio_interpolate(&short, RATE, &arctan(1)).unwrap_err(),
        Error::InvalidArgument(_)
    ));
    let image = Signal::new(vec![4, 4], vec![0.0; 16]).unwrap();
    assert!(task_audio_fit(&image, RATE, &arctan(1)).is_err());
}

#[test]
fn audio_fit_writes_wav_and_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let clip = tone(440.0, 256, 0.5);
    task_audio_fit(&clip, RATE, &arctan(3).with_out_dir(dir.path())).unwrap();
    let root = dir.path().join("audio/spder_arctan");
    let wav = read_wav(root.join("reconstruction.wav")).unwrap();
    assert_eq!((wav.sample_rate, wav.samples.len()), (RATE, 256));
    assert!(root.join("spectrum.csv").exists());
}
