//! On-disk model store: a directory holding `manifest.json` and `tensors.bin`.
//!
//! The blob is the concatenation of every tensor as little-endian `f32`. The
//! manifest carries the architecture, the skeleton topology and an index
//! mapping each tensor name to its shape and byte offset, so readers never
//! depend on the order of index entries.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{parse_topology, SkeletonTopology};
use crate::model::{Model, ModelConfig};
use crate::nn::{ParamStore, TensorBuf};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOB_FILE: &str = "tensors.bin";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub byte_offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub topology_digest: String,
    pub topology: serde_json::Value,
    pub model_config: ModelConfig,
    /// Layer policy the weights were trained under, e.g. `ssnet` or `fsnet:255`.
    pub train_mode: String,
    /// Completed epochs.
    pub epoch: usize,
    pub tensor_index: Vec<TensorEntry>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub manifest: Manifest,
    pub topology: SkeletonTopology,
    pub params: ParamStore<f32>,
}

impl Checkpoint {
    pub fn model(&self) -> Result<Model> {
        Model::bind(self.manifest.model_config.clone(), &self.topology, &self.params)
    }
}

fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}

fn blob_path(dir: &Path) -> PathBuf {
    dir.join(BLOB_FILE)
}

pub fn save_checkpoint(
    dir: &Path,
    params: &ParamStore<f32>,
    config: &ModelConfig,
    topology: &SkeletonTopology,
    train_mode: &str,
    epoch: usize,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut blob = Vec::with_capacity(params.scalar_count() * 4);
    let mut index = Vec::with_capacity(params.len());
    for p in params.iter() {
        index.push(TensorEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            byte_offset: blob.len() as u64,
        });
        for v in p.value.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let topology_doc: serde_json::Value =
        serde_json::from_str(&topology.to_json()).map_err(|e| Error::json("topology document", e))?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        topology_digest: topology.digest(),
        topology: topology_doc,
        model_config: config.clone(),
        train_mode: train_mode.to_string(),
        epoch,
        tensor_index: index,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json("checkpoint manifest", e))?;
    let bp = blob_path(dir);
    fs::write(&bp, &blob).map_err(|e| Error::io(&bp, e))?;
    let mp = manifest_path(dir);
    fs::write(&mp, text + "\n").map_err(|e| Error::io(&mp, e))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let mp = manifest_path(dir);
    let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("corrupted manifest {}: {e}", mp.display())))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {} is not supported (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    Ok(manifest)
}

/// Load and validate a checkpoint against its embedded topology.
pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let manifest = read_manifest(dir)?;
    let topology = parse_topology(&manifest.topology.to_string())
        .map_err(|e| Error::Checkpoint(format!("embedded topology: {e}")))?;
    if topology.digest() != manifest.topology_digest {
        return Err(Error::DigestMismatch {
            expected: manifest.topology_digest.clone(),
            found: topology.digest(),
        });
    }
    let bp = blob_path(dir);
    let blob = fs::read(&bp).map_err(|e| Error::io(&bp, e))?;

    let mut entries: Vec<&TensorEntry> = manifest.tensor_index.iter().collect();
    entries.sort_by_key(|e| e.byte_offset);
    let mut params = ParamStore::new();
    let mut covered = 0u64;
    for e in entries {
        let n: usize = e.shape.iter().product();
        let end = e.byte_offset + 4 * n as u64;
        if end > blob.len() as u64 {
            return Err(Error::Checkpoint(format!(
                "truncated blob: `{}` needs bytes {}..{end}, file has {}",
                e.name,
                e.byte_offset,
                blob.len()
            )));
        }
        if e.byte_offset < covered {
            return Err(Error::Checkpoint(format!("tensor `{}` overlaps its predecessor", e.name)));
        }
        covered = end;
        let bytes = &blob[e.byte_offset as usize..end as usize];
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        params
            .insert(&e.name, TensorBuf::from_vec(&e.shape, data)?)
            .map_err(|err| Error::Checkpoint(err.to_string()))?;
    }
    if covered != blob.len() as u64 {
        return Err(Error::Checkpoint(format!(
            "blob has {} bytes but the index covers {covered}",
            blob.len()
        )));
    }
    let ck = Checkpoint {
        manifest,
        topology,
        params,
    };
    ck.model()?;
    Ok(ck)
}

/// Load, additionally requiring the checkpoint to match `topology`.
pub fn load_checkpoint_for(dir: &Path, topology: &SkeletonTopology) -> Result<Checkpoint> {
    let manifest = read_manifest(dir)?;
    if manifest.topology_digest != topology.digest() {
        return Err(Error::DigestMismatch {
            expected: manifest.topology_digest,
            found: topology.digest(),
        });
    }
    load_checkpoint(dir)
}
