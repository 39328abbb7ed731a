//! The assembled network: tree convolutions feeding the temporal stack.

use serde::{Deserialize, Serialize};

use crate::data::{Frame, SkeletonTopology};
use crate::nn::{init_params_with, Grads, InitScheme, ParamStore, Real};
use crate::temporal::{HeadOut, Query, TemporalNet, TemporalSpec};
use crate::tree::{build_tap_tables, InputNorm, TapScheme, TreeConv, DEFAULT_TREE_DILATIONS};
use crate::{Error, Result};

/// Architecture hyper-parameters; stored in every checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub joints: usize,
    /// Classes including blank.
    pub classes: usize,
    #[serde(default)]
    pub tree_scheme: TapScheme,
    #[serde(default = "default_tree_dilations")]
    pub tree_dilations: Vec<usize>,
    #[serde(default)]
    pub temporal: TemporalSpec,
    #[serde(default = "default_fc_hidden")]
    pub fc_hidden: usize,
    /// Regress `s / (S_max − 1)` instead of raw frames.
    #[serde(default = "default_true")]
    pub normalize_distance: bool,
    #[serde(default)]
    pub init: InitScheme,
    /// Coordinate standardisation, usually fitted on the training streams.
    #[serde(default)]
    pub input_norm: Option<InputNorm>,
}

fn default_tree_dilations() -> Vec<usize> {
    DEFAULT_TREE_DILATIONS.to_vec()
}

fn default_fc_hidden() -> usize {
    50
}

fn default_true() -> bool {
    true
}

impl ModelConfig {
    pub fn new(joints: usize, classes: usize) -> Self {
        Self {
            joints,
            classes,
            tree_scheme: TapScheme::Corners,
            tree_dilations: default_tree_dilations(),
            temporal: TemporalSpec::default(),
            fc_hidden: default_fc_hidden(),
            normalize_distance: true,
            init: InitScheme::Uniform,
            input_norm: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Invalid(format!("need at least 2 classes, got {}", self.classes)));
        }
        if self.joints == 0 || self.fc_hidden == 0 || self.tree_dilations.is_empty() {
            return Err(Error::Invalid("joints, fc_hidden and tree_dilations must be non-empty".into()));
        }
        if let Some(n) = &self.input_norm {
            n.validate(self.repr_dim())?;
        }
        self.temporal.validate()
    }

    pub fn repr_dim(&self) -> usize {
        3 * self.joints
    }

    /// Largest distance a window can express, `S_max − 1`.
    pub fn max_distance(&self) -> usize {
        self.temporal.max_scale() - 1
    }

    /// Regression target in the units the head is trained on.
    pub fn distance_target(&self, s: usize) -> f64 {
        let s = s.min(self.max_distance()) as f64;
        if self.normalize_distance {
            s / self.max_distance() as f64
        } else {
            s
        }
    }

    /// Head output converted to frames and clamped to `[0, S_max − 1]`.
    pub fn distance_frames(&self, s_norm: f64) -> f64 {
        let m = self.max_distance() as f64;
        let s = if s_norm.is_finite() { s_norm } else { 0.0 };
        if self.normalize_distance {
            s.clamp(0.0, 1.0) * m
        } else {
            s.clamp(0.0, m)
        }
    }

    pub fn param_spec(&self, topology: &SkeletonTopology) -> Vec<(String, Vec<usize>)> {
        let h = build_tap_tables(topology, &self.tree_dilations, self.tree_scheme);
        let mut spec = TreeConv::param_spec(&h);
        spec.extend(TemporalNet::param_spec(&self.temporal, self.repr_dim(), self.fc_hidden, self.classes));
        spec
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub tree: TreeConv,
    pub temporal: TemporalNet,
}

/// Activations for one contiguous run of frames.
#[derive(Clone, Debug)]
pub struct ModelCache<T> {
    tree: crate::tree::conv::FrameTreeCache<T>,
    temporal: crate::temporal::SegmentCache<T>,
}

impl Model {
    pub fn bind<T: Real>(config: ModelConfig, topology: &SkeletonTopology, params: &ParamStore<T>) -> Result<Self> {
        config.validate()?;
        if topology.joint_count() != config.joints {
            return Err(Error::Invalid(format!(
                "topology has {} joints, model expects {}",
                topology.joint_count(),
                config.joints
            )));
        }
        let h = build_tap_tables(topology, &config.tree_dilations, config.tree_scheme);
        let mut tree = TreeConv::bind(h, params)?;
        tree.input_norm = config.input_norm.clone();
        let temporal = TemporalNet::bind(config.temporal.clone(), config.repr_dim(), config.fc_hidden, config.classes, params)?;
        Ok(Self { config, tree, temporal })
    }

    /// Fresh parameters drawn per `config.init` and the bound model.
    pub fn init<T: Real>(config: ModelConfig, topology: &SkeletonTopology, seed: u64) -> Result<(Self, ParamStore<T>)> {
        config.validate()?;
        let params = init_params_with(&config.param_spec(topology), seed, config.init)?;
        let model = Self::bind(config, topology, &params)?;
        Ok((model, params))
    }

    pub fn max_scale(&self) -> usize {
        self.config.temporal.max_scale()
    }

    pub fn reprs<T: Real>(&self, params: &ParamStore<T>, frames: &[Frame]) -> Vec<T> {
        let refs: Vec<&Frame> = frames.iter().collect();
        self.tree.infer_frames(params, &refs)
    }

    /// Forward over consecutive frames; reads before `frames[0]` are zero.
    pub fn forward<T: Real>(
        &self,
        params: &ParamStore<T>,
        frames: &[Frame],
        queries: &[Query],
    ) -> Result<(Vec<HeadOut<T>>, ModelCache<T>)> {
        let refs: Vec<&Frame> = frames.iter().collect();
        let (reprs, tree) = self.tree.forward_frames(params, &refs);
        let (outs, temporal) = self.temporal.forward(params, &reprs, queries)?;
        Ok((outs, ModelCache { tree, temporal }))
    }

    pub fn backward<T: Real>(
        &self,
        params: &ParamStore<T>,
        cache: &ModelCache<T>,
        d_logits: &[Vec<T>],
        d_s: &[T],
        grads: &mut Grads<T>,
    ) -> Result<()> {
        let d_reprs = self.temporal.backward(params, &cache.temporal, d_logits, d_s, grads)?;
        self.tree.backward_frames(params, &cache.tree, &d_reprs, grads)
    }
}
