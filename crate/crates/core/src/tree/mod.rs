//! Per-frame skeleton representation from a hierarchy of dilated tree
//! convolutions.

pub mod conv;
pub mod hierarchy;
pub mod norm;

pub use conv::{TreeCache, TreeConv};
pub use norm::InputNorm;
pub use hierarchy::{build_tap_tables, TapScheme, TreeHierarchy, TreeLayer, DEFAULT_TREE_DILATIONS};
