//! Binary checkpoint files.
//!
//! Layout: the 8-byte magic `SPANQACK`, a little-endian `u32` version, a
//! little-endian `u64` manifest length, the JSON manifest (model
//! configuration plus name, shape, element count and byte offset of every
//! tensor), the tensors as consecutive little-endian `f64` blobs, and a
//! SHA-256 digest of all preceding bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::params::{ModelConfig, ModelParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SPANQACK";
const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub count: usize,
    /// Byte offset inside the blob section.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ModelConfig,
    pub tensors: Vec<TensorEntry>,
}

pub fn to_bytes(params: &ModelParams) -> Vec<u8> {
    let mut offset = 0;
    let tensors = params
        .iter()
        .map(|(name, t)| {
            let entry = TensorEntry {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                count: t.len(),
                offset,
            };
            offset += 8 * t.len();
            entry
        })
        .collect();
    let manifest = Manifest {
        config: *params.config(),
        tensors,
    };
    let manifest = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(20 + manifest.len() + offset + DIGEST_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest);
    for (_, t) in params.iter() {
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelParams> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < MAGIC.len() + 12 + DIGEST_LEN || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(bad("checksum mismatch"));
    }
    let version = u32::from_le_bytes(body[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let manifest_len = u64::from_le_bytes(body[12..20].try_into().unwrap()) as usize;
    let manifest_end = 20usize
        .checked_add(manifest_len)
        .filter(|&e| e <= body.len())
        .ok_or_else(|| bad("truncated manifest"))?;
    let manifest: Manifest = serde_json::from_slice(&body[20..manifest_end])
        .map_err(|e| Error::Checkpoint(format!("bad manifest: {e}")))?;
    let blobs = &body[manifest_end..];
    let mut tensors = BTreeMap::new();
    for entry in &manifest.tensors {
        if entry.shape.iter().product::<usize>() != entry.count {
            return Err(Error::Checkpoint(format!(
                "{}: shape and count disagree",
                entry.name
            )));
        }
        let end = entry.offset + 8 * entry.count;
        let raw = blobs
            .get(entry.offset..end)
            .ok_or_else(|| Error::Checkpoint(format!("{}: blob out of range", entry.name)))?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let array = ArrayD::from_shape_vec(IxDyn(&entry.shape), data)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        tensors.insert(entry.name.clone(), array);
    }
    ModelParams::from_tensors(manifest.config, tensors)
        .map_err(|e| Error::Checkpoint(e.to_string()))
}

/// Writes the checkpoint and returns its hex checksum.
pub fn save(params: &ModelParams, path: impl AsRef<Path>) -> Result<String> {
    let bytes = to_bytes(params);
    fs::write(path, &bytes)?;
    Ok(hex::encode(&bytes[bytes.len() - DIGEST_LEN..]))
}

pub fn load(path: impl AsRef<Path>) -> Result<ModelParams> {
    from_bytes(&fs::read(path)?)
}

/// Hex checksum stored in a checkpoint file.
pub fn checksum(path: impl AsRef<Path>) -> Result<String> {
    let bytes = fs::read(path)?;
    if bytes.len() < DIGEST_LEN {
        return Err(Error::Checkpoint("file too short".into()));
    }
    Ok(hex::encode(&bytes[bytes.len() - DIGEST_LEN..]))
}
