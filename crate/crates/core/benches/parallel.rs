//! Data-parallel training step versus one thread.
//!
//! With the default `parallel` feature the same work runs on the full rayon
//! pool and on a one-thread pool; build with `--no-default-features` to time
//! the plain sequential code path instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssnet::data::{synth_generate, SkeletonTopology, SynthConfig};
use ssnet::model::{Model, ModelConfig};
use ssnet::par::is_parallel;
use ssnet::trainer::{batch_gradients, choose_layers, epoch_order, make_clips, Clip, TrainConfig};

fn training_batch(c: &mut Criterion) {
    let topology = SkeletonTopology::default_25();
    let streams = synth_generate(
        &SynthConfig {
            class_count: 6,
            stream_count: 4,
            stream_len: 600,
            duration_range: (40, 160),
            gap_range: (10, 60),
            noise_sigma: 0.01,
            topology: topology.clone(),
        },
        1,
    )
    .unwrap();
    let (model, params) = Model::init::<f32>(ModelConfig::new(25, 7), &topology, 1).unwrap();
    // 16 clips in 4 runs of 4, as the trainer batches them
    let cfg = TrainConfig { chunk_len: 4, ..TrainConfig::default() };
    let clips = make_clips(&streams, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let order = epoch_order(&clips, cfg.chunk_len, &mut rng);
    let batch: Vec<Clip> = order[..16].iter().map(|&i| clips[i]).collect();
    let layers = choose_layers(&batch, &cfg, &model.config.temporal, &mut rng);

    let mut group = c.benchmark_group("batch_gradients");
    group.sample_size(10);
    let run = || batch_gradients(&model, &params, &streams, &batch, &layers, 0.01).unwrap();
    if is_parallel() {
        let threads = rayon::current_num_threads();
        group.bench_function(BenchmarkId::new("pool", threads), |b| b.iter(run));
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        group.bench_function("single_thread", |b| b.iter(|| one.install(run)));
    } else {
        group.bench_function("sequential", |b| b.iter(run));
    }
    group.finish();
}

criterion_group!(benches, training_batch);
criterion_main!(benches);
