//! Clip sampling, the joint classification + regression loss and the epoch loop.

mod batch;
mod run;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{derive_frame_labels, AnnotatedStream, FrameLabel};
use crate::nn::OptConfig;
use crate::temporal::{proper_layer, TemporalSpec};
use crate::{Error, Result};

pub use batch::{batch_gradients, batch_loss, BatchLoss};
pub use run::{train, train_step, EpochLog, TrainOutcome, LOG_FILE};

/// How the classifier's layer is chosen while training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TrainMode {
    /// From the ground-truth start distance, with optional noise.
    #[default]
    SsNet,
    /// Always the lowest layer whose scale reaches `S`.
    FsNet(usize),
}

impl TrainMode {
    pub fn layer_for(&self, start_distance: usize, spec: &TemporalSpec) -> usize {
        match *self {
            TrainMode::SsNet => proper_layer(start_distance as f64, spec),
            TrainMode::FsNet(s) => proper_layer(s.saturating_sub(1) as f64, spec),
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainMode::SsNet => write!(f, "ssnet"),
            TrainMode::FsNet(s) => write!(f, "fsnet:{s}"),
        }
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "ssnet" {
            return Ok(TrainMode::SsNet);
        }
        if let Some(rest) = s.strip_prefix("fsnet:") {
            let scale: usize = rest
                .parse()
                .map_err(|_| Error::Invalid(format!("bad FSNet scale `{rest}`")))?;
            if scale == 0 {
                return Err(Error::Invalid("FSNet scale must be positive".into()));
            }
            return Ok(TrainMode::FsNet(scale));
        }
        Err(Error::Invalid(format!("unknown training mode `{s}` (expected ssnet or fsnet:S)")))
    }
}

impl Serialize for TrainMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TrainMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Weight of the regression loss.
    pub gamma: f64,
    pub clip_stride: usize,
    pub batch_size: usize,
    /// Consecutive clips of one stream kept together when shuffling; nearby
    /// clips share most of their window, so larger chunks train faster.
    pub chunk_len: usize,
    pub epochs: usize,
    pub opt: OptConfig,
    pub layer_noise_prob: f64,
    /// Largest layer offset a noisy clip may get; offsets are uniform in `1..=span`.
    pub layer_noise_span: usize,
    pub seed: u64,
    pub mode: TrainMode,
    /// Fit the model's input standardisation on the training streams when
    /// the model config does not carry one.
    pub standardize_input: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.01,
            clip_stride: 4,
            batch_size: 16,
            chunk_len: 1,
            epochs: 10,
            opt: OptConfig::default(),
            layer_noise_prob: 0.5,
            layer_noise_span: 1,
            seed: 0,
            mode: TrainMode::SsNet,
            standardize_input: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Invalid(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if self.clip_stride == 0 || self.batch_size == 0 || self.chunk_len == 0 || self.layer_noise_span == 0 {
            return Err(Error::Invalid(
                "clip_stride, batch_size, chunk_len and layer_noise_span must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.layer_noise_prob) {
            return Err(Error::Invalid(format!(
                "layer_noise_prob must lie in [0, 1], got {}",
                self.layer_noise_prob
            )));
        }
        self.opt.validate()
    }
}

/// A training window, identified by its stream and final frame.
///
/// The window covers `end + 1 − clip_len ..= end`; frames before the stream
/// start read as zero. Supervision is the label of `end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Clip {
    pub stream: usize,
    pub end: usize,
    pub label: FrameLabel,
}

/// Windows ending at `0, stride, 2·stride, …` in every stream, stream by stream.
pub fn make_clips(streams: &[AnnotatedStream], cfg: &TrainConfig) -> Result<Vec<Clip>> {
    if streams.iter().all(|s| s.is_empty()) {
        return Err(Error::Invalid("empty dataset: no frames to sample clips from".into()));
    }
    if cfg.clip_stride == 0 {
        return Err(Error::Invalid("clip_stride must be positive".into()));
    }
    let mut out = Vec::new();
    for (i, s) in streams.iter().enumerate() {
        let labels = derive_frame_labels(s);
        out.extend((0..s.len()).step_by(cfg.clip_stride).map(|end| Clip {
            stream: i,
            end,
            label: labels[end],
        }));
    }
    Ok(out)
}

/// Clip order for one epoch: runs of `chunk_len` consecutive clips of a
/// stream are shuffled as units.
pub fn epoch_order<R: Rng>(clips: &[Clip], chunk_len: usize, rng: &mut R) -> Vec<usize> {
    let mut chunks: Vec<Vec<usize>> = Vec::new();
    for (i, c) in clips.iter().enumerate() {
        match chunks.last_mut() {
            Some(last) if last.len() < chunk_len && clips[last[0]].stream == c.stream => last.push(i),
            _ => chunks.push(vec![i]),
        }
    }
    chunks.shuffle(rng);
    chunks.into_iter().flatten().collect()
}

/// Layer for each clip under `mode`, with `±1..=span` noise drawn from `rng`.
pub fn choose_layers<R: Rng>(clips: &[Clip], cfg: &TrainConfig, spec: &TemporalSpec, rng: &mut R) -> Vec<usize> {
    let top = spec.layers();
    clips
        .iter()
        .map(|c| {
            let base = cfg.mode.layer_for(c.label.start_distance, spec);
            if matches!(cfg.mode, TrainMode::SsNet) && cfg.layer_noise_prob > 0.0 && rng.random_bool(cfg.layer_noise_prob) {
                let up = rng.random_bool(0.5);
                let k = if cfg.layer_noise_span > 1 { rng.random_range(1..=cfg.layer_noise_span) } else { 1 };
                if up {
                    (base + k).min(top)
                } else {
                    base.saturating_sub(k).max(1)
                }
            } else {
                base
            }
        })
        .collect()
}
