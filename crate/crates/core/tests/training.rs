use std::fs;

use ssnet::checkpoint::{load_checkpoint, BLOB_FILE};
use ssnet::data::{synth_generate, AnnotatedStream, SkeletonTopology, SynthConfig};
use ssnet::model::{Model, ModelConfig};
use ssnet::temporal::TemporalSpec;
use ssnet::trainer::{train, TrainConfig, TrainMode, LOG_FILE};

fn tiny() -> (SkeletonTopology, Vec<AnnotatedStream>, ModelConfig, TrainConfig) {
    let topo = SkeletonTopology::full_binary(2);
    let streams = synth_generate(
        &SynthConfig {
            class_count: 2,
            stream_count: 2,
            stream_len: 60,
            duration_range: (8, 20),
            gap_range: (4, 10),
            noise_sigma: 0.01,
            topology: topo.clone(),
        },
        3,
    )
    .unwrap();
    let mut mc = ModelConfig::new(topo.joint_count(), 3);
    mc.temporal = TemporalSpec { dilations: vec![1, 2, 4], channels: 6 };
    mc.fc_hidden = 8;
    let tc = TrainConfig {
        epochs: 2,
        batch_size: 4,
        chunk_len: 2,
        clip_stride: 3,
        ..TrainConfig::default()
    };
    (topo, streams, mc, tc)
}

#[test]
fn zero_epochs_saves_the_initialisation() {
    let (topo, streams, mc, mut tc) = tiny();
    tc.epochs = 0;
    tc.seed = 11;
    let dir = tempfile::tempdir().unwrap();
    let out = train(&streams, &topo, mc.clone(), &tc, Some(dir.path()), |_| {}).unwrap();
    assert!(out.log.is_empty());
    let (_, init) = Model::init::<f32>(mc, &topo, 11).unwrap();
    let ck = load_checkpoint(dir.path()).unwrap();
    assert_eq!(ck.manifest.epoch, 0);
    for p in init.iter() {
        assert_eq!(ck.params.get(&p.name).unwrap().data(), p.value.data(), "{}", p.name);
    }
    let log = fs::read_to_string(dir.path().join(LOG_FILE)).unwrap();
    assert_eq!(log.trim(), "epoch,loss,loss_c,loss_s,lr,frame_acc");
}

#[test]
fn log_rows_and_decay() {
    let (topo, streams, mc, tc) = tiny();
    let dir = tempfile::tempdir().unwrap();
    let mut seen = Vec::new();
    let out = train(&streams, &topo, mc, &tc, Some(dir.path()), |r| seen.push(r.epoch)).unwrap();
    assert_eq!(seen, vec![1, 2]);
    assert_eq!(out.log[0].lr, tc.opt.learning_rate);
    assert!((out.log[1].lr - tc.opt.learning_rate * tc.opt.decay).abs() < 1e-15);
    for r in &out.log {
        assert!((r.loss - (r.loss_c + tc.gamma * r.loss_s)).abs() < 1e-9);
        assert!((0.0..=1.0).contains(&r.frame_acc));
    }
    let log = fs::read_to_string(dir.path().join(LOG_FILE)).unwrap();
    assert_eq!(log.lines().count(), 3);
    assert_eq!(load_checkpoint(dir.path()).unwrap().manifest.epoch, 2);
}

#[test]
fn same_seed_same_bytes() {
    let (topo, streams, mc, mut tc) = tiny();
    tc.mode = TrainMode::FsNet(8);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    train(&streams, &topo, mc.clone(), &tc, Some(a.path()), |_| {}).unwrap();
    train(&streams, &topo, mc.clone(), &tc, Some(b.path()), |_| {}).unwrap();
    assert_eq!(fs::read(a.path().join(BLOB_FILE)).unwrap(), fs::read(b.path().join(BLOB_FILE)).unwrap());
    tc.seed += 1;
    let c = tempfile::tempdir().unwrap();
    train(&streams, &topo, mc, &tc, Some(c.path()), |_| {}).unwrap();
    assert_ne!(fs::read(a.path().join(BLOB_FILE)).unwrap(), fs::read(c.path().join(BLOB_FILE)).unwrap());
}

#[test]
fn mismatched_joints_rejected() {
    let (_, streams, mc, tc) = tiny();
    let other = SkeletonTopology::full_binary(3);
    let mut mc = mc;
    mc.joints = other.joint_count();
    assert!(train(&streams, &other, mc, &tc, None, |_| {}).is_err());
}
