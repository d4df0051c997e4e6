use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::kernels::{gram_factored, Kernel};

/// Mix a base seed with a stream tag into an independent substream seed
/// (SplitMix64 finalizer). Used to keep sampling deterministic when work is
/// distributed over layers, rows, or folds.
pub fn derive_stream(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Vector of iid standard normals from a seeded stream.
pub fn standard_normal_vector(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// One joint draw of a GP on the rows of `points`: `mean + L xi` with
/// `L L^T = Gram + eps I` under the jitter policy. Deterministic per seed.
pub fn sample_gp(
    points: &DMatrix<f64>,
    kernel: &dyn Kernel,
    mean: &dyn Fn(&DVector<f64>) -> f64,
    seed: u64,
) -> Result<DVector<f64>> {
    let n = points.nrows();
    let (_, chol) = gram_factored(points, kernel)?;
    let xi = standard_normal_vector(n, seed);
    let mut out = chol.l() * xi;
    for i in 0..n {
        out[i] += mean(&points.row(i).transpose());
    }
    Ok(out)
}
