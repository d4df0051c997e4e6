//! Shared Gaussian machinery: robust factorization, Gaussian distributions
//! and KL divergence, sparse conditionals, and GP sampling on point sets.

mod chol;
mod gaussian;
mod sample;
mod sparse;

pub use chol::{robust_cholesky, RobustCholesky};
pub use gaussian::{gaussian_kl, GaussianDist};
pub use sample::{derive_stream, sample_gp, standard_normal_vector};
pub use sparse::{sparse_conditional, ConditionalMarginal, InducingSet};

/// Floor applied to predictive variances before they enter log densities.
pub const VARIANCE_FLOOR: f64 = 1e-12;
