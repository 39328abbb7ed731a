//! The TOML run configuration. Every section is optional; unknown keys are errors.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use ssnet::model::ModelConfig;
use ssnet::nn::InitScheme;
use ssnet::temporal::TemporalSpec;
use ssnet::trainer::TrainConfig;
use ssnet::tree::{TapScheme, DEFAULT_TREE_DILATIONS};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub paths: PathsSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub classes: usize,
    pub streams: usize,
    pub stream_len: usize,
    pub duration: (usize, usize),
    pub gap: (usize, usize),
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            classes: 6,
            streams: 40,
            stream_len: 1000,
            duration: (40, 160),
            gap: (10, 60),
            noise: 0.01,
            seed: 7,
        }
    }
}

/// Architecture knobs; joint and class counts come from the data.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub tree_scheme: TapScheme,
    pub tree_dilations: Vec<usize>,
    pub temporal: TemporalSpec,
    pub fc_hidden: usize,
    pub normalize_distance: bool,
    pub init: InitScheme,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::new(1, 2);
        Self {
            tree_scheme: m.tree_scheme,
            tree_dilations: DEFAULT_TREE_DILATIONS.to_vec(),
            temporal: m.temporal,
            fc_hidden: m.fc_hidden,
            normalize_distance: m.normalize_distance,
            init: m.init,
        }
    }
}

impl ModelSection {
    pub fn build(&self, joints: usize, classes: usize) -> ModelConfig {
        ModelConfig {
            joints,
            classes,
            tree_scheme: self.tree_scheme,
            tree_dilations: self.tree_dilations.clone(),
            temporal: self.temporal.clone(),
            fc_hidden: self.fc_hidden,
            normalize_distance: self.normalize_distance,
            init: self.init,
            input_norm: None,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub topology: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.train.validate()?;
        cfg.model.temporal.validate()?;
        Ok(cfg)
    }
}
