//! Gaussian-process regression with locally linear deformation kernels.
//!
//! The crate provides:
//!
//! - [`kernels`]: anisotropic SE kernels, lengthscale-mixture kernels over a
//!   matrix field, deformation kernels `pi(||W(a)a - W(b)b||^2)`, and the 1D
//!   gradient-variance identities relating them.
//! - [`gp`]: robust Cholesky factorization, Gaussian KL, sparse conditionals,
//!   and joint GP sampling.
//! - [`tdgp`]: the two-layer model in which each entry of `W(.)` carries its
//!   own GP prior; closed-form expected-kernel statistics, the collapsed
//!   evidence lower bound with exact gradients, moment-matched prediction,
//!   and interpretability exports.
//! - [`deep`]: depth-`L` prior samplers for compositional and deformation
//!   hierarchies with saturation statistics.
//! - [`data`], [`train`], [`metrics`]: dataset tooling, the three-phase Adam
//!   schedule, and evaluation reports.

// Indexed loops over matrix entries are the house style in the numeric
// kernels, and `!(v > 0.0)` is the NaN-catching domain check.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod data;
pub mod deep;
pub mod error;
pub mod gp;
pub mod kernels;
pub mod metrics;
pub mod tdgp;
pub mod train;

pub use error::{Error, Result};
