//! "FPAW" weight files: magic, u32 version, u32 JSON length, JSON header
//! (network configuration and tensor table), then float32 LE tensor data.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::NetworkConfig;
use super::model::{ModelWeights, Tensor};
use crate::container::write_atomic;
use crate::error::{Error, Result};

pub const FPAW_MAGIC: [u8; 4] = *b"FPAW";
pub const FPAW_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TableEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: NetworkConfig,
    dtype: String,
    tensors: Vec<TableEntry>,
}

pub fn encode_weights(w: &ModelWeights) -> Result<Vec<u8>> {
    w.audit()?;
    let header = Header {
        config: w.config,
        dtype: "f32le".into(),
        tensors: w.tensors.iter().map(|t| TableEntry { name: t.name.clone(), shape: t.shape.clone() }).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(12 + json.len() + 4 * w.parameter_count());
    out.extend_from_slice(&FPAW_MAGIC);
    out.extend_from_slice(&FPAW_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for t in &w.tensors {
        for &v in &t.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

fn u32_at(bytes: &[u8], at: usize) -> Result<u32> {
    let b = bytes.get(at..at + 4).ok_or(Error::Truncated { expected: at + 4, found: bytes.len() })?;
    Ok(u32::from_le_bytes(b.try_into().expect("four bytes")))
}

pub fn decode_weights(bytes: &[u8]) -> Result<ModelWeights> {
    let magic = bytes.get(..4).ok_or(Error::Truncated { expected: 4, found: bytes.len() })?;
    if magic != FPAW_MAGIC {
        return Err(Error::BadMagic {
            expected: FPAW_MAGIC,
            found: magic.try_into().expect("four bytes"),
        });
    }
    let version = u32_at(bytes, 4)?;
    if version != FPAW_VERSION {
        return Err(Error::VersionMismatch { expected: FPAW_VERSION, found: version });
    }
    let json_len = u32_at(bytes, 8)? as usize;
    let json = bytes.get(12..12 + json_len).ok_or(Error::Truncated { expected: 12 + json_len, found: bytes.len() })?;
    let header: Header = serde_json::from_slice(json).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    if header.dtype != "f32le" {
        return Err(Error::MalformedHeader(format!("unsupported dtype {}", header.dtype)));
    }
    header.config.validate()?;

    let mut offset = 12 + json_len;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for entry in header.tensors {
        let n: usize = entry.shape.iter().product();
        let end = offset + 4 * n;
        let raw = bytes.get(offset..end).ok_or(Error::ShapeAudit {
            name: entry.name.clone(),
            reason: format!("declares {n} values but the payload ends early"),
        })?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")) as f64).collect();
        tensors.push(Tensor { name: entry.name, shape: entry.shape, data });
        offset = end;
    }
    if offset != bytes.len() {
        return Err(Error::ShapeAudit {
            name: "<payload>".into(),
            reason: format!("{} bytes beyond the declared tensors", bytes.len() - offset),
        });
    }
    let w = ModelWeights { config: header.config, tensors };
    w.audit()?;
    Ok(w)
}

pub fn save_weights(w: &ModelWeights, path: &Path) -> Result<()> {
    write_atomic(path, &encode_weights(w)?)
}

pub fn load_weights(path: &Path) -> Result<ModelWeights> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes)
}
