//! Dataset directories: one frame file and one annotation file per stream.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::stream::parse_stream;
use crate::data::AnnotatedStream;
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
const FRAMES_SUFFIX: &str = ".frames.jsonl";
const ANNOTATIONS_SUFFIX: &str = ".annotations.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub streams: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Free-form generator settings.
    #[serde(default)]
    pub generator: serde_json::Value,
}

pub fn frames_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}{FRAMES_SUFFIX}"))
}

pub fn annotations_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}{ANNOTATIONS_SUFFIX}"))
}

pub fn stream_name(i: usize) -> String {
    format!("stream_{i:03}")
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Write streams as `stream_000…` plus a manifest. The directory must exist.
pub fn write_dataset(
    dir: &Path,
    streams: &[AnnotatedStream],
    seed: Option<u64>,
    generator: serde_json::Value,
) -> Result<DatasetManifest> {
    let names: Vec<String> = (0..streams.len()).map(stream_name).collect();
    for (name, s) in names.iter().zip(streams) {
        write(&frames_path(dir, name), &s.frames_jsonl())?;
        write(&annotations_path(dir, name), &s.annotations_json())?;
    }
    let manifest = DatasetManifest {
        streams: names,
        seed,
        generator,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
    write(&dir.join(MANIFEST), &text)?;
    Ok(manifest)
}

/// Stream names in a dataset directory: the manifest listing if present,
/// otherwise every `*.frames.jsonl` file in sorted order.
pub fn list_streams(dir: &Path) -> Result<Vec<String>> {
    let manifest = dir.join(MANIFEST);
    if manifest.exists() {
        let m: DatasetManifest = serde_json::from_str(&read(&manifest)?)
            .map_err(|e| Error::json(manifest.display().to_string(), e))?;
        return Ok(m.streams);
    }
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let file = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = file.strip_suffix(FRAMES_SUFFIX) {
            names.push(stem.to_string());
        }
    }
    names.sort();
    Ok(names)
}

pub fn load_stream(dir: &Path, name: &str, joints: usize) -> Result<AnnotatedStream> {
    let frames = read(&frames_path(dir, name))?;
    let ann = read(&annotations_path(dir, name))?;
    parse_stream(&frames, &ann, joints)
}

pub fn load_dataset(dir: &Path, joints: usize) -> Result<Vec<(String, AnnotatedStream)>> {
    let names = list_streams(dir)?;
    if names.is_empty() {
        return Err(Error::Stream(format!("no streams found in {}", dir.display())));
    }
    names
        .into_iter()
        .map(|n| load_stream(dir, &n, joints).map(|s| (n, s)))
        .collect()
}
