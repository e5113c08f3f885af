//! Harmonizable mixture kernels, their generalized spectral densities and
//! Wigner distributions, and sparse variational GP inference with
//! variational Fourier features.

// Index loops mirror the matrix formulas; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod experiments;
pub mod inference;
pub mod kernels;
pub mod linalg;
pub mod optim;
pub mod spectral;

pub use kernels::{HmkComponent, HmkParams, LsgParams, SmParams};
pub use linalg::{CholeskyFactor, HermitianMatrix, LinalgError};
