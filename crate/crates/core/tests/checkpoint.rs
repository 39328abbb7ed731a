use std::fs;

use ssnet::checkpoint::{load_checkpoint, load_checkpoint_for, read_manifest, save_checkpoint, Manifest, BLOB_FILE, MANIFEST_FILE};
use ssnet::data::SkeletonTopology;
use ssnet::model::{Model, ModelConfig};
use ssnet::Error;

fn saved(dir: &std::path::Path) -> (ModelConfig, ssnet::nn::ParamStore<f32>) {
    let topo = SkeletonTopology::default_25();
    let config = ModelConfig::new(25, 7);
    let (_, params) = Model::init::<f32>(config.clone(), &topo, 42).unwrap();
    save_checkpoint(dir, &params, &config, &topo, "ssnet", 3).unwrap();
    (config, params)
}

#[test]
fn round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let (config, params) = saved(dir.path());
    let ck = load_checkpoint(dir.path()).unwrap();
    assert_eq!(ck.manifest.model_config, config);
    assert_eq!(ck.manifest.epoch, 3);
    assert_eq!(ck.manifest.train_mode, "ssnet");
    assert_eq!(ck.params.len(), params.len());
    for (a, b) in params.iter().zip(ck.params.iter()) {
        assert_eq!(a.name, b.name);
        assert_eq!(a.value.shape(), b.value.shape());
        let bits = |p: &ssnet::nn::params::Param<f32>| p.value.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b), "{}", a.name);
    }
    ck.model().unwrap();
}

#[test]
fn index_order_does_not_matter() {
    let dir = tempfile::tempdir().unwrap();
    let (_, params) = saved(dir.path());
    let mp = dir.path().join(MANIFEST_FILE);
    let mut m: Manifest = serde_json::from_str(&fs::read_to_string(&mp).unwrap()).unwrap();
    m.tensor_index.reverse();
    fs::write(&mp, serde_json::to_string(&m).unwrap()).unwrap();
    let ck = load_checkpoint(dir.path()).unwrap();
    for p in params.iter() {
        assert_eq!(ck.params.get(&p.name).unwrap().data(), p.value.data());
    }
}

#[test]
fn corrupted_manifest_is_named() {
    let dir = tempfile::tempdir().unwrap();
    saved(dir.path());
    let mp = dir.path().join(MANIFEST_FILE);
    let mut text = fs::read_to_string(&mp).unwrap();
    text.truncate(text.len() / 2);
    fs::write(&mp, text).unwrap();
    let err = load_checkpoint(dir.path()).unwrap_err();
    assert!(matches!(err, Error::Checkpoint(_)), "{err:?}");
    assert!(err.to_string().contains("corrupted manifest"), "{err}");
}

#[test]
fn unsupported_version_rejected() {
    let dir = tempfile::tempdir().unwrap();
    saved(dir.path());
    let mp = dir.path().join(MANIFEST_FILE);
    let text = fs::read_to_string(&mp).unwrap().replace("\"format_version\": 1", "\"format_version\": 99");
    fs::write(&mp, text).unwrap();
    let err = read_manifest(dir.path()).unwrap_err();
    assert!(err.to_string().contains("format version 99"), "{err}");
}

#[test]
fn truncated_blob_rejected() {
    let dir = tempfile::tempdir().unwrap();
    saved(dir.path());
    let bp = dir.path().join(BLOB_FILE);
    let bytes = fs::read(&bp).unwrap();
    fs::write(&bp, &bytes[..bytes.len() - 4]).unwrap();
    let err = load_checkpoint(dir.path()).unwrap_err();
    assert!(err.to_string().contains("truncated blob"), "{err}");
}

#[test]
fn trailing_bytes_rejected() {
    let dir = tempfile::tempdir().unwrap();
    saved(dir.path());
    let bp = dir.path().join(BLOB_FILE);
    let mut bytes = fs::read(&bp).unwrap();
    bytes.extend_from_slice(&[0; 4]);
    fs::write(&bp, bytes).unwrap();
    assert!(load_checkpoint(dir.path()).is_err());
}

#[test]
fn digest_mismatch_names_both_digests() {
    let dir = tempfile::tempdir().unwrap();
    saved(dir.path());
    let other = SkeletonTopology::full_binary(3);
    let err = load_checkpoint_for(dir.path(), &other).unwrap_err();
    let expected = SkeletonTopology::default_25().digest();
    match &err {
        Error::DigestMismatch { expected: e, found } => {
            assert_eq!(e, &expected);
            assert_eq!(found, &other.digest());
        }
        other => panic!("unexpected {other:?}"),
    }
    let msg = err.to_string();
    assert!(msg.contains(&expected) && msg.contains(&other.digest()), "{msg}");
    load_checkpoint_for(dir.path(), &SkeletonTopology::default_25()).unwrap();
}

#[test]
fn tampered_embedded_topology_detected() {
    let dir = tempfile::tempdir().unwrap();
    saved(dir.path());
    let mp = dir.path().join(MANIFEST_FILE);
    let mut m: Manifest = serde_json::from_str(&fs::read_to_string(&mp).unwrap()).unwrap();
    m.topology_digest = "0".repeat(64);
    fs::write(&mp, serde_json::to_string(&m).unwrap()).unwrap();
    assert!(matches!(load_checkpoint(dir.path()), Err(Error::DigestMismatch { .. })));
}
