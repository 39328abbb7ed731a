//! Streaming skeleton-based online action prediction.
//!
//! The model is a stack of dilated causal temporal convolutions fed by a
//! hierarchy of dilated tree convolutions over the skeleton. At every frame
//! the network classifies the ongoing action and regresses the distance to
//! its start point; that distance picks how many temporal layers feed the
//! classifier at the next frame.
//!
//! Module map:
//!
//! * [`data`] – skeleton topology, annotated streams, frame labels, synthetic data.
//! * [`nn`] – numeric kernels with hand-written backward passes, optimizer, gradient checks.
//! * [`tree`] – dilated tree convolutions producing one representation per frame.
//! * [`temporal`] – scale table, proper-layer selection, the temporal stack and its heads.
//! * [`model`] – the assembled network and its parameter layout.
//! * [`trainer`] – clip sampling, joint loss, the epoch loop.
//! * [`stream`] – online inference with activation sharing.
//! * [`eval`] – prediction metrics.
//! * [`checkpoint`] – manifest + blob checkpoint format.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod par;
pub mod stream;
pub mod temporal;
pub mod trainer;
pub mod tree;

pub use error::{Error, Result};
