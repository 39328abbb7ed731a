use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::checkpoint::save_checkpoint;
use crate::data::{AnnotatedStream, SkeletonTopology};
use crate::model::{Model, ModelConfig};
use crate::nn::{sgd_momentum_step, OptConfig, ParamStore, Real};
use crate::tree::InputNorm;
use crate::trainer::{batch_gradients, choose_layers, epoch_order, make_clips, BatchLoss, Clip, TrainConfig};
use crate::{Error, Result};

/// Training log written next to the checkpoint tensors.
pub const LOG_FILE: &str = "train_log.csv";

const RNG_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub loss_c: f64,
    pub loss_s: f64,
    pub lr: f64,
    /// Fraction of this epoch's clips whose final frame was classified correctly.
    pub frame_acc: f64,
}

pub struct TrainOutcome {
    pub model: Model,
    pub params: ParamStore<f32>,
    pub log: Vec<EpochLog>,
}

/// Choose layers, compute the batch gradient and take one optimizer step.
#[allow(clippy::too_many_arguments)]
pub fn train_step<T: Real>(
    model: &Model,
    params: &mut ParamStore<T>,
    streams: &[AnnotatedStream],
    batch: &[Clip],
    cfg: &TrainConfig,
    learning_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<BatchLoss> {
    let layers = choose_layers(batch, cfg, &model.config.temporal, rng);
    let (loss, grads) = batch_gradients(model, params, streams, batch, &layers, cfg.gamma)?;
    if !loss.loss.is_finite() {
        let ends: Vec<String> = batch.iter().take(4).map(|c| format!("{}@{}", c.stream, c.end)).collect();
        return Err(Error::Diverged(format!(
            "loss {} (loss_c {}, loss_s {}) on a batch of {} clips starting {} at lr {learning_rate}",
            loss.loss,
            loss.loss_c,
            loss.loss_s,
            batch.len(),
            ends.join(", ")
        )));
    }
    params.set_grads(&grads);
    let opt = OptConfig {
        learning_rate,
        ..cfg.opt.clone()
    };
    sgd_momentum_step(params, &opt)?;
    Ok(loss)
}

fn check_streams(streams: &[AnnotatedStream], config: &ModelConfig) -> Result<()> {
    for (i, s) in streams.iter().enumerate() {
        if s.joints() != config.joints {
            return Err(Error::Invalid(format!(
                "stream {i} has {} joints, model expects {}",
                s.joints(),
                config.joints
            )));
        }
        if s.class_count > config.classes {
            return Err(Error::Invalid(format!(
                "stream {i} uses {} classes, model has {}",
                s.class_count, config.classes
            )));
        }
    }
    Ok(())
}

fn write_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if log.is_empty() {
        w.write_record(["epoch", "loss", "loss_c", "loss_s", "lr", "frame_acc"])?;
    }
    for row in log {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Train from a fresh initialisation.
///
/// With `out` set, the checkpoint there is rewritten after every epoch (and
/// once up front when `epochs` is 0) together with the CSV log. `on_epoch`
/// sees each log row as it is produced.
pub fn train(
    streams: &[AnnotatedStream],
    topology: &SkeletonTopology,
    mut config: ModelConfig,
    cfg: &TrainConfig,
    out: Option<&Path>,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.standardize_input && config.input_norm.is_none() {
        config.input_norm = Some(InputNorm::fit(streams)?);
    }
    check_streams(streams, &config)?;
    let clips = make_clips(streams, cfg)?;
    let (model, mut params) = Model::init::<f32>(config, topology, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ RNG_SALT);
    let mode = cfg.mode.to_string();
    let save = |params: &ParamStore<f32>, epoch: usize, log: &[EpochLog]| -> Result<()> {
        if let Some(dir) = out {
            save_checkpoint(dir, params, &model.config, topology, &mode, epoch)?;
            write_log(&dir.join(LOG_FILE), log)?;
        }
        Ok(())
    };
    let mut log = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        save(&params, 0, &log)?;
    }
    for epoch in 0..cfg.epochs {
        let lr = cfg.opt.learning_rate * cfg.opt.decay.powi(epoch as i32);
        let order = epoch_order(&clips, cfg.chunk_len, &mut rng);
        let (mut lc, mut ls, mut correct) = (0.0, 0.0, 0usize);
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<Clip> = idx.iter().map(|&i| clips[i]).collect();
            let loss = train_step(&model, &mut params, streams, &batch, cfg, lr, &mut rng)
                .map_err(|e| match e {
                    Error::Diverged(msg) => Error::Diverged(format!("epoch {}: {msg}", epoch + 1)),
                    other => other,
                })?;
            lc += loss.loss_c * loss.count as f64;
            ls += loss.loss_s * loss.count as f64;
            correct += loss.correct;
        }
        let n = clips.len() as f64;
        let row = EpochLog {
            epoch: epoch + 1,
            loss: (lc + cfg.gamma * ls) / n,
            loss_c: lc / n,
            loss_s: ls / n,
            lr,
            frame_acc: correct as f64 / n,
        };
        on_epoch(&row);
        log.push(row);
        save(&params, epoch + 1, &log)?;
    }
    Ok(TrainOutcome { model, params, log })
}
