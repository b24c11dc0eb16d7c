//! Binary checkpoint container (`.spdr`).
//!
//! All integers and floats are little-endian.
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0  | 4 | magic `SPDR` |
//! | 4  | 4 | version, u32 (= 1) |
//! | 8  | 4 | in_dim, u32 |
//! | 12 | 4 | out_dim, u32 |
//! | 16 | 4 | hidden_width, u32 |
//! | 20 | 4 | depth, u32 |
//! | 24 | 1 | activation: 0 relu, 1 semiperiodic |
//! | 25 | 1 | damping: index into [`DampingKind::ALL`] (0 for relu) |
//! | 26 | 1 | encoding: 0 none, 1 positional, 2 Fourier features |
//! | 27 | 1 | reserved, 0 |
//! | 28 | 8 | omega0, f64 |
//! | 36 | 8 | clamp_eps, f64 |
//! | 44 | 8 | encoding count (levels or features), u64 |
//! | 52 | 8 | encoding frequency (base_omega or scale), f64 |
//! | 60 | 8 | encoding seed, u64 |
//! | 68 | 8 | init seed, u64 |
//! | 76 | … | per layer: weight `fan_in × fan_out` row-major f64, then bias `fan_out` f64 |

use std::path::Path;

use crate::activations::{ActivationKind, ActivationSpec, DampingKind};
use crate::encoding::EncodingSpec;
use crate::error::{Error, Result};
use crate::io::atomic_write;
use crate::network::{Layer, MlpConfig, MlpParams};
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 4] = b"SPDR";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 76;

pub fn encode_checkpoint(config: &MlpConfig, params: &MlpParams) -> Result<Vec<u8>> {
    config.validate()?;
    let dims = config.layer_dims();
    if params.layers.len() != dims.len() - 1
        || params
            .layers
            .iter()
            .zip(dims.windows(2))
            .any(|(l, w)| l.weight.shape() != (w[0], w[1]) || l.bias.len() != w[1])
    {
        return Err(Error::InvalidShape("parameters do not match the config".into()));
    }
    let u32_field = |v: usize, name: &str| {
        u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{name} {v} exceeds u32")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * config.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for (v, name) in [
        (config.in_dim, "in_dim"),
        (config.out_dim, "out_dim"),
        (config.hidden_width, "hidden_width"),
        (config.depth, "depth"),
    ] {
        out.extend_from_slice(&u32_field(v, name)?.to_le_bytes());
    }
    let (act, damp) = match config.activation.kind {
        ActivationKind::Relu => (0u8, 0u8),
        ActivationKind::Semiperiodic(d) => (
            1,
            DampingKind::ALL.iter().position(|&k| k == d).expect("listed") as u8,
        ),
    };
    let (enc, count, freq, enc_seed) = match config.encoding {
        EncodingSpec::None => (0u8, 0u64, 0.0, 0u64),
        EncodingSpec::PositionalEncoding { levels, base_omega } => (1, levels as u64, base_omega, 0),
        EncodingSpec::FourierFeatures { count, scale, seed } => (2, count as u64, scale, seed),
    };
    out.extend_from_slice(&[act, damp, enc, 0]);
    out.extend_from_slice(&config.activation.omega0.to_le_bytes());
    out.extend_from_slice(&config.activation.clamp_eps.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&freq.to_le_bytes());
    out.extend_from_slice(&enc_seed.to_le_bytes());
    out.extend_from_slice(&config.seed.to_le_bytes());
    for v in params.tensors().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let chunk = self
            .bytes
            .get(self.pos..self.pos + N)
            .ok_or_else(|| Error::Parse {
                offset: self.pos,
                message: "checkpoint truncated".into(),
            })?;
        self.pos += N;
        Ok(chunk.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take()?) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn invalid(&self, at: usize, message: String) -> Error {
        Error::Parse {
            offset: at,
            message,
        }
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(MlpConfig, MlpParams)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take::<4>()? != *MAGIC {
        return Err(r.invalid(0, "not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::UnsupportedFormat(format!(
            "checkpoint version {version}, expected {VERSION}"
        )));
    }
    let in_dim = r.u32()?;
    let out_dim = r.u32()?;
    let hidden_width = r.u32()?;
    let depth = r.u32()?;
    let [act, damp, enc, _] = r.take::<4>()?;
    let omega0 = r.f64()?;
    let clamp_eps = r.f64()?;
    let count = r.u64()?;
    let freq = r.f64()?;
    let enc_seed = r.u64()?;
    let seed = r.u64()?;

    let kind = match act {
        0 => ActivationKind::Relu,
        1 => ActivationKind::Semiperiodic(
            *DampingKind::ALL
                .get(damp as usize)
                .ok_or_else(|| r.invalid(25, format!("unknown damping code {damp}")))?,
        ),
        other => return Err(r.invalid(24, format!("unknown activation code {other}"))),
    };
    let encoding = match enc {
        0 => EncodingSpec::None,
        1 => EncodingSpec::PositionalEncoding {
            levels: count as usize,
            base_omega: freq,
        },
        2 => EncodingSpec::FourierFeatures {
            count: count as usize,
            scale: freq,
            seed: enc_seed,
        },
        other => return Err(r.invalid(26, format!("unknown encoding code {other}"))),
    };
    let config = MlpConfig {
        in_dim,
        out_dim,
        hidden_width,
        depth,
        activation: ActivationSpec::new(kind, omega0, clamp_eps)?,
        encoding,
        seed,
    };
    config
        .validate()
        .map_err(|e| r.invalid(8, format!("invalid config: {e}")))?;

    let expected = HEADER_LEN + 8 * config.parameter_count();
    if bytes.len() != expected {
        return Err(r.invalid(
            bytes.len().min(expected),
            format!("checkpoint has {} bytes, config implies {expected}", bytes.len()),
        ));
    }
    let dims = config.layer_dims();
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for w in dims.windows(2) {
        let weight = (0..w[0] * w[1]).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let bias = (0..w[1]).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        layers.push(Layer {
            weight: Matrix::new(w[0], w[1], weight)?,
            bias,
        });
    }
    Ok((config, MlpParams { layers }))
}

pub fn save_checkpoint(config: &MlpConfig, params: &MlpParams, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path, &encode_checkpoint(config, params)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(MlpConfig, MlpParams)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    decode_checkpoint(&bytes)
}
