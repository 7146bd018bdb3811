//! The FPAI image container and its JSON sidecar.
//!
//! Layout (little-endian): magic `FPAI`, u32 version, u32 rows, u32 cols,
//! u32 channels, u32 reserved (0), then `channels*rows*cols` f32 samples,
//! channel-major then row-major.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::RealImage;

pub const MAGIC: [u8; 4] = *b"FPAI";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

/// One or more equally sized channels stored together.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    channels: Vec<RealImage>,
}

impl ImageStack {
    pub fn new(channels: Vec<RealImage>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::param("channels", "a stack needs at least one channel"))?;
        for ch in &channels[1..] {
            first.check_same_dims(ch)?;
        }
        Ok(Self { channels })
    }

    pub fn single(img: RealImage) -> Self {
        Self {
            channels: vec![img],
        }
    }

    pub fn channels(&self) -> &[RealImage] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<RealImage> {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        self.channels[0].dims()
    }

    /// Takes the only channel, failing if there is more than one.
    pub fn into_single(self) -> Result<RealImage> {
        if self.channels.len() != 1 {
            return Err(Error::ShapeMismatch {
                expected: "1 channel".into(),
                actual: format!("{} channels", self.channels.len()),
            });
        }
        Ok(self.channels.into_iter().next().unwrap())
    }
}

pub fn encode_container(stack: &ImageStack) -> Vec<u8> {
    let (rows, cols) = stack.dims();
    let n = stack.channels.len();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n * rows * cols);
    out.extend_from_slice(&MAGIC);
    for v in [VERSION, rows as u32, cols as u32, n as u32, 0] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for ch in &stack.channels {
        for &v in ch.as_slice() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_container(bytes: &[u8]) -> Result<ImageStack> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != VERSION {
        return Err(Error::VersionMismatch {
            expected: VERSION,
            found: version,
        });
    }
    let (rows, cols, channels, reserved) = (word(1) as usize, word(2) as usize, word(3) as usize, word(4));
    if reserved != 0 {
        return Err(Error::MalformedHeader(format!("reserved word is {reserved}, expected 0")));
    }
    if rows == 0 || cols == 0 || channels == 0 {
        return Err(Error::MalformedHeader(format!(
            "zero-sized payload: {rows}x{cols}x{channels}"
        )));
    }
    let expected = channels
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .and_then(|v| v.checked_mul(4))
        .and_then(|v| v.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::MalformedHeader(format!(
            "{} trailing bytes after payload",
            bytes.len() - expected
        )));
    }
    let samples: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let plane = rows * cols;
    let mut out = Vec::with_capacity(channels);
    for (c, chunk) in samples.chunks_exact(plane).enumerate() {
        let img = RealImage::new(rows, cols, chunk.to_vec()).map_err(|e| match e {
            Error::NonFinite { index } => Error::NonFinite {
                index: c * plane + index,
            },
            other => other,
        })?;
        out.push(img);
    }
    ImageStack::new(out)
}

pub fn write_container(path: impl AsRef<Path>, stack: &ImageStack) -> Result<()> {
    write_atomic(path.as_ref(), &encode_container(stack))
}

pub fn read_container(path: impl AsRef<Path>) -> Result<ImageStack> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_container(&bytes)
}

/// Writes through a temporary sibling file followed by a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// What a container holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Fringe,
    Phase,
    Orientation,
    Direction,
    Encoding,
    ErrorMap,
}

/// JSON manifest stored next to a container (same basename, `.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub kind: Kind,
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl Sidecar {
    pub fn new(kind: Kind, seed: Option<u64>, params: serde_json::Value) -> Self {
        Self { kind, seed, params }
    }
}

pub fn sidecar_path(container: &Path) -> PathBuf {
    container.with_extension("json")
}

pub fn write_sidecar(container: &Path, sidecar: &Sidecar) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(sidecar)?;
    write_atomic(&sidecar_path(container), &bytes)
}

/// Reads the sidecar of `container`, `None` when absent.
pub fn read_sidecar(container: &Path) -> Result<Option<Sidecar>> {
    let path = sidecar_path(container);
    match fs::read(&path) {
        Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}
