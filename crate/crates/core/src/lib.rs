//! Dissipative Hamiltonian dynamics through symplectic convex analysis.
//!
//! Phase space, convex functions with symplectic polars, likelihoods and
//! bipotentials, a time stepper for the gap-vector inclusion, and the
//! energy-balance and dissipation checks run on its trajectories.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bipotential;
pub mod checks;
pub mod convex;
pub mod dynamics;
pub mod error;
pub mod likelihood;
pub mod phase_space;
pub mod reference;
pub mod sampling;
pub mod scenarios;
pub mod serde_ext;

pub use convex::{ConvexFunction, ExtendedReal};
pub use error::{Error, Result};
pub use phase_space::{DualityKind, PhaseVector, SymplecticStructure};
