//! Tensor-ring simulation and training of variational quantum circuits.
//!
//! The state of `N` qubits is stored as a ring of `N` cores of shape
//! `χ × χ × 2`. Single-qubit gates act on one core exactly; two-qubit gates on
//! neighbouring cores are applied by contracting the pair, applying the gate
//! and splitting it again with an SVD truncated to rank `χ`.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the precision.

pub mod autodiff;
pub mod circuit;
pub mod data;
pub mod error;
pub mod gates;
pub mod linalg;
pub mod oracle;
pub mod ring;
pub mod scalar;
pub mod svd;
pub mod train;

#[cfg(test)]
mod testutil;

pub use autodiff::{backward, finite_diff_grad, GradVector, Tape};
pub use circuit::{default_readout, encode, forward, readout, CircuitSpec, FeatureVector, ParamVector};
pub use error::{Error, Result};
pub use gates::GateMatrix;
pub use oracle::{sv_forward, sv_probabilities, StateVector};
pub use ring::{BasisState, CoreTensor, TensorRing};
pub use scalar::{Real, C};
pub use train::{evaluate, train, LossKind, Metrics, TrainConfig};

pub type TensorRing64 = TensorRing<f64>;
pub type TensorRing32 = TensorRing<f32>;
pub type StateVector64 = StateVector<f64>;
pub type ParamVector64 = ParamVector<f64>;
pub type Dataset64 = data::Dataset<f64>;
pub type Complex64 = C<f64>;
