use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Two stacked sub-networks with dilations doubling from 1 to 64.
pub const DEFAULT_DILATIONS: [usize; 14] = [1, 2, 4, 8, 16, 32, 64, 1, 2, 4, 8, 16, 32, 64];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemporalSpec {
    pub dilations: Vec<usize>,
    pub channels: usize,
}

impl Default for TemporalSpec {
    fn default() -> Self {
        Self {
            dilations: DEFAULT_DILATIONS.to_vec(),
            channels: 50,
        }
    }
}

impl TemporalSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return Err(Error::Invalid(format!("dilations {:?} must be positive", self.dilations)));
        }
        if self.channels == 0 {
            return Err(Error::Invalid("channels must be positive".into()));
        }
        Ok(())
    }

    pub fn layers(&self) -> usize {
        self.dilations.len()
    }

    /// Receptive field of the top layer.
    pub fn max_scale(&self) -> usize {
        1 + self.dilations.iter().sum::<usize>()
    }
}

/// Receptive field in frames of each layer: `1 + d_1 + … + d_l`.
pub fn scale_table(spec: &TemporalSpec) -> Vec<usize> {
    spec.dilations
        .iter()
        .scan(1usize, |acc, d| {
            *acc += d;
            Some(*acc)
        })
        .collect()
}

/// Lowest layer (1-based) whose scale covers `round(s_prev) + 1` frames,
/// or the top layer when none does.
pub fn proper_layer(s_prev: f64, spec: &TemporalSpec) -> usize {
    let rounded = if s_prev.is_finite() { s_prev.round() } else { 0.0 };
    let target = (rounded + 1.0).max(1.0);
    scale_table(spec)
        .iter()
        .position(|&s| s as f64 >= target)
        .map(|i| i + 1)
        .unwrap_or(spec.layers())
}
