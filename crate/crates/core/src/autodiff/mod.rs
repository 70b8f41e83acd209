//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Parameters live in a [`Parameters`] collection outside any graph. Each
//! forward pass records onto a fresh [`Tape`]; [`Tape::backward_into`] then
//! accumulates gradients into the parameters and [`AdamState::step`] applies
//! an update.

mod adam;
mod gemm;
mod params;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use params::{ParamId, Parameters};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
