//! Dilated causal temporal convolutions, scale selection and the two heads.

pub mod net;
pub mod scale;

pub use net::{HeadOut, Query, SegmentCache, TemporalNet};
pub use scale::{proper_layer, scale_table, TemporalSpec, DEFAULT_DILATIONS};
