//! Checkpoint file layout (all integers little-endian):
//!
//! ```text
//! "SSIA" | version: u32 | header_len: u64 | header: JSON | payload: f32...
//! ```
//!
//! The JSON header holds the network configuration and a manifest of every
//! parameter (name, shape, byte offset into the payload). Parameters are
//! stored in name order as 32-bit floats.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{NetConfig, NetworkParams};
use crate::tensor::{Shape, Tensor};

pub const MAGIC: &[u8; 4] = b"SSIA";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: NetConfig,
    params: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: [usize; 4],
    offset: usize,
}

pub fn to_bytes(config: &NetConfig, params: &NetworkParams) -> Result<Vec<u8>> {
    let mut manifest = Vec::with_capacity(params.len());
    let mut payload = Vec::with_capacity(params.numel() * 4);
    for (name, t) in params.iter() {
        manifest.push(ManifestEntry {
            name: name.clone(),
            shape: t.shape().0,
            offset: payload.len(),
        });
        for &v in t.data() {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let header = serde_json::to_vec(&Header {
        config: config.clone(),
        params: manifest,
    })
    .map_err(|e| Error::Checkpoint(e.to_string()))?;

    let mut out = Vec::with_capacity(16 + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<(NetConfig, NetworkParams)> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a checkpoint".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {VERSION})"
        )));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
    header.config.validate()?;
    let payload = &bytes[header_end..];

    let expected: usize = header
        .params
        .iter()
        .map(|p| Shape(p.shape).numel() * 4)
        .sum();
    if expected != payload.len() {
        return Err(Error::Checkpoint(format!(
            "manifest describes {expected} payload bytes, file has {}",
            payload.len()
        )));
    }
    let mut tensors = BTreeMap::new();
    for entry in header.params {
        let shape = Shape(entry.shape);
        let end = entry.offset + shape.numel() * 4;
        let raw = payload.get(entry.offset..end).ok_or_else(|| {
            Error::Checkpoint(format!("parameter `{}` lies outside the payload", entry.name))
        })?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
            .collect();
        if tensors
            .insert(entry.name.clone(), Tensor::new(shape, data)?)
            .is_some()
        {
            return Err(Error::Checkpoint(format!("duplicate parameter `{}`", entry.name)));
        }
    }
    let params = NetworkParams::from_map(&header.config, tensors)?;
    Ok((header.config, params))
}

pub fn save(path: &Path, config: &NetConfig, params: &NetworkParams) -> Result<()> {
    std::fs::write(path, to_bytes(config, params)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(NetConfig, NetworkParams)> {
    from_bytes(&std::fs::read(path)?)
}
