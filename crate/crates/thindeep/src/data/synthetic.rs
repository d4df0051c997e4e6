use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

/// The funnel map `h(x) = 2 x0 sin(pi x0) + 2 cos(pi x0)`; it depends only on
/// the first coordinate, inducing a one-dimensional manifold.
pub fn funnel_h(x0: f64) -> f64 {
    2.0 * x0 * (std::f64::consts::PI * x0).sin() + 2.0 * (std::f64::consts::PI * x0).cos()
}

/// The outer map `g(z) = sin(z)/z - z^2`, with the removable singularity at
/// zero filled by its series `1 - z^2/6`.
pub fn funnel_g(z: f64) -> f64 {
    let sinc = if z.abs() < 1e-8 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    };
    sinc - z * z
}

/// Synthetic regression data: `x ~ Uniform([-1,1]^2)`, `y = g(h(x))`, with a
/// deterministic 50/50 train (fold 0) / validation (fold 1) split.
pub fn gen_synthetic(n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::invalid("gen_synthetic: need at least two rows"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..=1.0));
    let y = DVector::from_fn(n, |i, _| funnel_g(funnel_h(x[(i, 0)])));
    let perm = super::seeded_permutation(n, crate::gp::derive_stream(seed, 1));
    let mut folds = vec![1usize; n];
    for &row in perm.iter().take(n / 2) {
        folds[row] = 0;
    }
    Ok(Dataset {
        x,
        y,
        feature_names: vec!["x0".to_string(), "x1".to_string()],
        target_name: "y".to_string(),
        folds,
        norm: None,
    })
}
