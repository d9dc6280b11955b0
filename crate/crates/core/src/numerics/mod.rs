//! Deterministic linear algebra, sampling, and quadrature primitives shared
//! by the analysis modules.

pub mod matrix;
pub mod quadrature;
pub mod rng;

pub use matrix::{largest_eigenvalue_real, matrix_exp, random_stable_matrix, SquareMatrix, StableMatrix};
pub use quadrature::{gauss_hermite_expectation, QuadratureRule, DEFAULT_ORDER};
pub use rng::{sample_standard_normal, RandomStream, Sampler, GENERATOR_NAME, NORMAL_TRANSFORM};
