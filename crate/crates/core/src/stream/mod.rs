//! Online per-frame inference.
//!
//! Each new frame costs one tree-conv pass and exactly one activation column
//! per temporal layer: the older inputs a dilated layer needs are kept in a
//! ring buffer per layer, so nothing is recomputed.

mod engine;
mod predictions;

use std::fmt;
use std::str::FromStr;

use crate::data::{derive_frame_labels, AnnotatedStream};
use crate::temporal::{proper_layer, TemporalSpec};
use crate::{Error, Result};

pub use engine::{run_stream, run_stream_naive, stream_init, stream_step, StreamState, TimingReport};
pub use predictions::{read_predictions, write_predictions, Prediction};

/// Layer-selection policy at inference time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    /// From the distance regressed at the previous frame.
    #[default]
    SsNet,
    /// Fixed: the lowest layer whose scale reaches `S`.
    FsNet(usize),
    /// From an externally supplied ground-truth distance.
    SsNetGt,
}

impl Mode {
    pub fn needs_ground_truth(&self) -> bool {
        matches!(self, Mode::SsNetGt)
    }

    /// Layer feeding the classifier given the previous estimate and the
    /// optional ground truth for the current frame.
    pub fn select(&self, s_prev: f64, gt: Option<f64>, spec: &TemporalSpec) -> Result<usize> {
        Ok(match *self {
            Mode::SsNet => proper_layer(s_prev, spec),
            Mode::FsNet(s) => proper_layer(s.saturating_sub(1) as f64, spec),
            Mode::SsNetGt => {
                let gt = gt.ok_or_else(|| Error::Invalid("ssnet-gt mode needs a ground-truth distance for every frame".into()))?;
                proper_layer(gt, spec)
            }
        })
    }
}

/// Per-frame true start distances, the input `ssnet-gt` selects layers from.
/// Blank frames count from the start of their gap, as in training.
pub fn ground_truth_distances(stream: &AnnotatedStream) -> Vec<f64> {
    derive_frame_labels(stream).iter().map(|l| l.start_distance as f64).collect()
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::SsNet => write!(f, "ssnet"),
            Mode::FsNet(s) => write!(f, "fsnet:{s}"),
            Mode::SsNetGt => write!(f, "ssnet-gt"),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ssnet" => Ok(Mode::SsNet),
            "ssnet-gt" => Ok(Mode::SsNetGt),
            other => match other.strip_prefix("fsnet:").map(str::parse::<usize>) {
                Some(Ok(scale)) if scale > 0 => Ok(Mode::FsNet(scale)),
                _ => Err(Error::Invalid(format!(
                    "unknown mode `{s}` (expected ssnet, ssnet-gt or fsnet:S)"
                ))),
            },
        }
    }
}
