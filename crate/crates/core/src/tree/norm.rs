use serde::{Deserialize, Serialize};

use crate::data::AnnotatedStream;
use crate::{Error, Result};

/// Affine standardisation of raw joint coordinates: `(x − mean[k]) / std`.
///
/// One pooled scale keeps the relative magnitudes of joints intact, so that
/// nearly static joints are not blown up to unit variance. An all-zero body
/// (the placeholder for a frame without a skeleton) stays zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputNorm {
    /// Per-coordinate mean, `3·J` values.
    pub mean: Vec<f64>,
    pub std: f64,
}

impl InputNorm {
    /// Statistics over every body of every frame.
    pub fn fit(streams: &[AnnotatedStream]) -> Result<Self> {
        let dim = streams
            .iter()
            .flat_map(|s| s.frames.first())
            .map(|f| f.bodies[0].coords.len())
            .next()
            .ok_or_else(|| Error::Invalid("no frames to fit the input normalisation on".into()))?;
        let mut mean = vec![0.0; dim];
        let mut n = 0usize;
        let bodies = || {
            streams
                .iter()
                .flat_map(|s| &s.frames)
                .flat_map(|f| &f.bodies)
                .filter(|b| b.coords.iter().any(|v| *v != 0.0))
        };
        for b in bodies() {
            if b.coords.len() != dim {
                return Err(Error::Shape(format!("body with {} coordinates, expected {dim}", b.coords.len())));
            }
            for (m, v) in mean.iter_mut().zip(&b.coords) {
                *m += *v as f64;
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::Invalid("every body is empty".into()));
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut ss = 0.0;
        for b in bodies() {
            for (m, v) in mean.iter().zip(&b.coords) {
                ss += (*v as f64 - m).powi(2);
            }
        }
        let std = (ss / (n * dim) as f64).sqrt();
        let norm = Self { mean, std: if std > 0.0 { std } else { 1.0 } };
        norm.validate(dim)?;
        Ok(norm)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.mean.len() != dim {
            return Err(Error::Invalid(format!("input norm has {} means, expected {dim}", self.mean.len())));
        }
        if !(self.std > 0.0 && self.std.is_finite()) || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Invalid("input norm must be finite with a positive std".into()));
        }
        Ok(())
    }

    pub fn apply(&self, body: &[f32], out: &mut Vec<f64>) {
        if body.iter().all(|v| *v == 0.0) {
            out.extend(std::iter::repeat_n(0.0, body.len()));
            return;
        }
        let inv = 1.0 / self.std;
        out.extend(body.iter().zip(&self.mean).map(|(v, m)| (*v as f64 - m) * inv));
    }
}
