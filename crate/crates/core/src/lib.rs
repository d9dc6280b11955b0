//! Numerical laboratory for long-range dependency (LRD) analysis of
//! sequence-model recurrences.
//!
//! The crate implements three hidden-state models side by side:
//!
//! * a linear state-space recurrence with zero-order-hold discretization and
//!   an optional input-dependent step size ([`ssm`]),
//! * a single softmax self-attention layer ([`attention`]),
//! * a state-space recurrence augmented with a rank-1 input/state interaction
//!   term ([`interaction`]),
//!
//! together with the machinery to measure how strongly a past input
//! influences a later hidden state: closed-form derivatives, a central
//! finite-difference oracle, and decay-bound checks ([`lrd`]), plus Monte
//! Carlo verification of the interaction model's stability tail bounds
//! ([`stability`]).
//!
//! All randomness flows through a counter-based generator with explicit
//! substreams ([`numerics::rng`]), so every result is reproducible bit for
//! bit regardless of thread count. Data-parallel sweeps use rayon when the
//! `parallel` feature (on by default) is enabled and fall back to sequential
//! iteration otherwise; both paths produce identical output.

pub mod attention;
pub mod error;
pub mod exec;
pub mod interaction;
pub mod lrd;
pub mod numerics;
pub mod ssm;
pub mod stability;

pub use error::{Error, Result};

// Re-exported so downstream crates build vectors and matrices against the
// same nalgebra version.
pub use nalgebra;
