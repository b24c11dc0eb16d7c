//! Architecture names and the frozen hyperparameter table.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::activations::{ActivationSpec, DampingKind};
use crate::encoding::EncodingSpec;
use crate::error::{Error, Result};
use crate::network::MlpConfig;
use crate::optim::AdamHyper;
use crate::signal::{AUDIO_BOUNDS, UNIT_BOUNDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    Relu,
    ReluPe,
    ReluFfn,
    Siren,
    /// `None` picks the domain's default damping.
    Spder(Option<DampingKind>),
}

impl Architecture {
    pub fn damping(self, domain: Domain) -> Option<DampingKind> {
        match self {
            Architecture::Spder(d) => Some(d.unwrap_or(domain.default_damping())),
            Architecture::Siren => Some(DampingKind::Const1),
            _ => None,
        }
    }

    /// Canonical name with the damping resolved, e.g. `spder:arctan`.
    pub fn label(self, domain: Domain) -> String {
        match self {
            Architecture::Spder(_) => format!("spder:{}", self.damping(domain).expect("spder")),
            other => other.to_string(),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Relu => f.write_str("relu"),
            Architecture::ReluPe => f.write_str("relu_pe"),
            Architecture::ReluFfn => f.write_str("relu_ffn"),
            Architecture::Siren => f.write_str("siren"),
            Architecture::Spder(None) => f.write_str("spder"),
            Architecture::Spder(Some(d)) => write!(f, "spder:{d}"),
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Ok(match lower.as_str() {
            "relu" => Architecture::Relu,
            "relu_pe" | "relu+pe" | "relu-pe" => Architecture::ReluPe,
            "relu_ffn" | "relu+ffn" | "relu-ffn" => Architecture::ReluFfn,
            "siren" => Architecture::Siren,
            "spder" => Architecture::Spder(None),
            other => match other.strip_prefix("spder:") {
                Some(d) => Architecture::Spder(Some(d.parse()?)),
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown preset '{s}' (expected relu, relu_pe, relu_ffn, siren or spder:<damping>)"
                    )))
                }
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Image,
    Audio,
    Video,
}

impl Domain {
    pub fn default_damping(self) -> DampingKind {
        match self {
            Domain::Audio => DampingKind::Arctan,
            Domain::Image | Domain::Video => DampingKind::SqrtAbs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub depth: usize,
    pub width: usize,
    pub lr: f64,
    pub bounds: (f64, f64),
}

pub const IMAGE_PRESET: Preset = Preset {
    depth: 5,
    width: 256,
    lr: 1e-4,
    bounds: UNIT_BOUNDS,
};

pub const AUDIO_PRESET: Preset = Preset {
    depth: 5,
    width: 256,
    lr: 5e-5,
    bounds: AUDIO_BOUNDS,
};

pub const VIDEO_PRESET: Preset = Preset {
    depth: 12,
    width: 1024,
    lr: 5e-6,
    bounds: UNIT_BOUNDS,
};

/// Reduced video network for CPU runs.
pub const VIDEO_DESK_PRESET: Preset = Preset {
    depth: 6,
    width: 256,
    lr: 1e-4,
    bounds: UNIT_BOUNDS,
};

pub fn preset(domain: Domain, paper_scale: bool) -> Preset {
    match domain {
        Domain::Image => IMAGE_PRESET,
        Domain::Audio => AUDIO_PRESET,
        Domain::Video if paper_scale => VIDEO_PRESET,
        Domain::Video => VIDEO_DESK_PRESET,
    }
}

/// The network and optimizer an architecture gets in a domain.
pub fn resolve(
    arch: Architecture,
    domain: Domain,
    paper_scale: bool,
    in_dim: usize,
    seed: u64,
) -> (MlpConfig, AdamHyper) {
    let p = preset(domain, paper_scale);
    let (activation, encoding) = match arch {
        Architecture::Relu => (ActivationSpec::relu(), EncodingSpec::None),
        Architecture::ReluPe => (ActivationSpec::relu(), EncodingSpec::positional()),
        Architecture::ReluFfn => (ActivationSpec::relu(), EncodingSpec::fourier_features(seed)),
        Architecture::Siren | Architecture::Spder(_) => (
            ActivationSpec::spder(arch.damping(domain).expect("semiperiodic")),
            EncodingSpec::None,
        ),
    };
    let config = MlpConfig::new(in_dim, 1, activation)
        .with_shape(p.depth, p.width)
        .with_encoding(encoding)
        .with_seed(seed);
    (config, AdamHyper::with_lr(p.lr))
}
