//! Toric code decoding workbench.
//!
//! * [`code`]: lattice geometry, Pauli errors over F2, syndromes, logical content.
//! * [`noise`]: depolarizing noise and reproducible sample streams.
//! * [`symmetry`]: translation action on syndromes and the logical twist masks.
//! * [`exact`]: brute-force maximum-likelihood oracle for `L = 3`.
//! * [`mwpm`]: minimum-weight perfect matching baseline.
//! * [`end`]: translation-equivariant neural decoder with twisted pooling.
//! * [`harness`]: accuracy evaluation, threshold fits and self checks.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the widths used in practice.

pub mod bits;
pub mod code;
pub mod end;
pub mod error;
pub mod exact;
pub mod harness;
pub mod logical;
pub mod mwpm;
pub mod noise;
pub mod scalar;
pub mod symmetry;

pub use code::{Lattice, LogicalBits, Orientation, PauliError, Syndrome};
pub use error::{Error, Result};
pub use logical::LogicalTensor;
pub use noise::{Depolarizing, NoiseModel, Sample, StreamKey};
pub use scalar::Scalar;
pub use symmetry::{Translation, Twist, TwistGrid};

/// Probability tensors produced by the exact oracle.
pub type LogicalTensor64 = LogicalTensor<f64>;
/// Single-precision tensors produced by the neural decoder.
pub type LogicalTensor32 = LogicalTensor<f32>;

/// Training and inference width.
pub type Model32 = end::Model<f32>;
/// Gradient-check width.
pub type Model64 = end::Model<f64>;
