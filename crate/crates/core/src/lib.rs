//! Learning a shared low-dimensional linear representation across many
//! linear-regression tasks, and transferring it to a new task.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! pieces: dense linear algebra kernels, the synthetic generative model,
//! the method-of-moments estimator, the regularized factorized objective with
//! its quasi-Newton optimizer, and the new-task regression. File formats,
//! the experiment sweep driver and the CLI live in the `sharedrep` crate.
//!
//! Model: `y_i = x_iᵀ B α_{t(i)} + ε_i` with `B` a `d × r` matrix with
//! orthonormal columns, `α_j ∈ ℝʳ` the per-task coefficients and `t(i)` the
//! task of sample `i`.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
pub mod landscape;
pub mod linalg;
pub mod model;
pub mod mom;
pub mod rng;
pub mod transfer;

pub use error::{Error, Result};
pub use linalg::{FeatureMatrix, Matrix};
