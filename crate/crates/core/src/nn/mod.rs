//! Minimal differentiable numeric substrate.
//!
//! There is no autodiff graph: every layer the network needs has a forward
//! and a hand-written backward here or in the layer modules built on top.

pub mod gradcheck;
pub mod ops;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod tensor;

pub use gradcheck::{finite_diff_check, ridders_diff_check};
pub use optim::{grad_norm, sgd_momentum_step, OptConfig};
pub use params::{init_params, init_params_with, Grads, InitScheme, ParamStore};
pub use scalar::Real;
pub use tensor::TensorBuf;
