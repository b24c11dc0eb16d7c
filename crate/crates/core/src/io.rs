//! File codecs: binary PGM (P5), PCM16 WAV, atomic writes and run manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Writes via a temporary sibling file and a rename, so readers never see a
/// partial file.
pub fn atomic_write(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::file(&dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::file(path, e)
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::file(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    Ok(sha256_hex(&read_file(path.as_ref())?))
}

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width * height != pixels.len() || width == 0 || height == 0 {
            return Err(Error::InvalidShape(format!(
                "{width}x{height} image with {} pixels",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Normalized to `[-1, 1]` with shape `(height, width)`.
    pub fn to_signal(&self) -> Result<Signal> {
        crate::signal::normalize_u8(&self.pixels, vec![self.height, self.width])
    }

    pub fn from_signal(signal: &Signal) -> Result<Self> {
        let [h, w] = signal.shape()[..] else {
            return Err(Error::Unsupported(format!(
                "images are 2D, signal has shape {:?}",
                signal.shape()
            )));
        };
        Self::new(w, h, crate::signal::denormalize_u8(signal))
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    if !bytes.starts_with(b"P5") {
        return Err(cur.error("missing P5 magic"));
    }
    cur.pos = 2;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "PGM maxval {maxval}; only 8-bit files with maxval 255 are supported"
        )));
    }
    if !bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(cur.error("expected a single whitespace byte before pixel data"));
    }
    cur.pos += 1;
    let count = width
        .checked_mul(height)
        .filter(|&c| c > 0)
        .ok_or_else(|| cur.error(format!("bad dimensions {width}x{height}")))?;
    let data = &bytes[cur.pos..];
    if data.len() < count {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!("truncated pixel data: need {count} bytes, have {}", data.len()),
        });
    }
    GrayImage::new(width, height, data[..count].to_vec())
}

pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    parse_pgm(&read_file(path)?).map_err(|e| match e {
        Error::Parse { offset, message } => Error::Parse {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn write_pgm(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path, &encode_pgm(image))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavAudio {
    pub sample_rate: u32,
    /// Channel count of the source file before downmixing.
    pub channels: u16,
    /// Mono samples in `[-1, 1)`.
    pub samples: Vec<f64>,
}

impl WavAudio {
    pub fn to_signal(&self) -> Result<Signal> {
        Ok(Signal::new(vec![self.samples.len()], self.samples.clone())?.with_bit_depth(16))
    }
}

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Parses RIFF/WAVE PCM16. Stereo (or wider) input is averaged to mono.
pub fn parse_wav(bytes: &[u8]) -> Result<WavAudio> {
    let err = |offset: usize, message: &str| Error::Parse {
        offset,
        message: message.to_string(),
    };
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(err(0, "not a RIFF/WAVE file"));
    }
    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| err(pos + 4, "chunk runs past end of file"))?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(err(body, "fmt chunk too short"));
                }
                format = Some((
                    le_u16(bytes, body),
                    le_u16(bytes, body + 2),
                    le_u32(bytes, body + 4),
                    le_u16(bytes, body + 14),
                ));
            }
            b"data" => {
                let (tag, channels, rate, bits) =
                    format.ok_or_else(|| err(pos, "data chunk before fmt chunk"))?;
                // 0xFFFE is WAVE_FORMAT_EXTENSIBLE; its PCM sub-format is accepted too.
                if tag != 1 && tag != 0xFFFE {
                    return Err(Error::UnsupportedFormat(format!(
                        "WAV format tag {tag:#06x}; only uncompressed PCM is supported"
                    )));
                }
                if bits != 16 {
                    return Err(Error::UnsupportedFormat(format!(
                        "{bits}-bit WAV; only 16-bit PCM is supported"
                    )));
                }
                if channels == 0 {
                    return Err(err(body, "zero channels"));
                }
                let frame = 2 * channels as usize;
                let samples = bytes[body..end]
                    .chunks_exact(frame)
                    .map(|f| {
                        let sum: f64 = f
                            .chunks_exact(2)
                            .map(|s| i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0)
                            .sum();
                        sum / channels as f64
                    })
                    .collect();
                if channels > 1 {
                    log::warn!("downmixing {channels}-channel audio to mono");
                }
                return Ok(WavAudio {
                    sample_rate: rate,
                    channels,
                    samples,
                });
            }
            _ => {}
        }
        pos = end + (size & 1);
    }
    Err(err(bytes.len(), "no data chunk"))
}

/// Mono PCM16. Samples are clamped to `[-1, 1]` and rounded to the nearest code.
pub fn encode_wav(samples: &[f64], sample_rate: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        let code = (s.clamp(-1.0, 1.0) * 32768.0)
            .round_ties_even()
            .clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        out.extend_from_slice(&code.to_le_bytes());
    }
    out
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<WavAudio> {
    parse_wav(&read_file(path.as_ref())?)
}

pub fn write_wav(signal: &Signal, sample_rate: u32, path: impl AsRef<Path>) -> Result<()> {
    if signal.dims() != 1 {
        return Err(Error::Unsupported("WAV output needs a 1D signal".into()));
    }
    atomic_write(path, &encode_wav(signal.values(), sample_rate))
}

/// Video frames as a directory of `frame_NNNN.pgm` files.
pub fn read_frame_dir(dir: impl AsRef<Path>) -> Result<Vec<GrayImage>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::file(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!("no .pgm frames in {}", dir.display())));
    }
    let frames = paths.iter().map(read_pgm).collect::<Result<Vec<_>>>()?;
    let (w, h) = (frames[0].width, frames[0].height);
    if frames.iter().any(|f| f.width != w || f.height != h) {
        return Err(Error::InvalidShape(format!(
            "frames in {} differ in size",
            dir.display()
        )));
    }
    Ok(frames)
}

pub fn write_frame_dir(frames: &[GrayImage], dir: impl AsRef<Path>) -> Result<()> {
    for (i, f) in frames.iter().enumerate() {
        write_pgm(f, dir.as_ref().join(format!("frame_{i:04}.pgm")))?;
    }
    Ok(())
}

/// Provenance written next to every run: what ran, with which inputs, how long.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub task: String,
    pub preset: String,
    pub seed: u64,
    pub prng: String,
    pub crate_version: String,
    /// Input path to SHA-256.
    pub input_checksums: Vec<(String, String)>,
    pub status: String,
    pub wall_ms: Option<u64>,
    /// Task-specific configuration and results.
    pub details: serde_json::Value,
}

impl RunManifest {
    pub fn begin(command_line: Vec<String>, task: &str, preset: &str, seed: u64) -> Self {
        Self {
            command_line,
            task: task.to_string(),
            preset: preset.to_string(),
            seed,
            prng: crate::network::PRNG_ALGORITHM.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            input_checksums: Vec::new(),
            status: "running".into(),
            wall_ms: None,
            details: serde_json::Value::Null,
        }
    }

    pub fn add_input(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let digest = if path.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| Error::file(path, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            entries.sort();
            let mut hasher = Sha256::new();
            for p in entries {
                hasher.update(read_file(&p)?);
            }
            hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
        } else {
            sha256_file(path)?
        };
        self.input_checksums.push((path.display().to_string(), digest));
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut json = serde_json::to_vec_pretty(self)?;
        json.push(b'\n');
        atomic_write(path, &json)
    }
}
