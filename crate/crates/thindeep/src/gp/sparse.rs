use nalgebra::{DMatrix, DVector};

use super::chol::robust_cholesky;
use super::gaussian::GaussianDist;
use crate::error::Result;
use crate::kernels::{gram, Kernel};

/// Pseudo-inputs of a sparse GP layer (one row per inducing point).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct InducingSet {
    pub z: DMatrix<f64>,
}

impl InducingSet {
    pub fn new(z: DMatrix<f64>) -> crate::error::Result<Self> {
        if z.nrows() == 0 {
            return Err(crate::error::Error::invalid(
                "inducing set needs at least one point",
            ));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(crate::error::Error::invalid(
                "inducing inputs must be finite",
            ));
        }
        Ok(InducingSet { z })
    }

    pub fn len(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.nrows() == 0
    }
}

/// Marginal of the sparse conditional at one evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalMarginal {
    pub mean: f64,
    pub var: f64,
}

/// Per-point marginals of `int p(f(x*) | v) q(v) dv` for an inducing-point
/// Gaussian `q(v)`:
///
/// mean: `m(x*) + k_*v Kv^{-1} (mu - m(Z))`
/// var:  `k_** - k_*v Kv^{-1} (Kv - Sigma) Kv^{-1} k_v*`
///
/// Returns the marginals and the number of variance clamps at zero.
pub fn sparse_conditional(
    x_star: &DMatrix<f64>,
    inducing: &InducingSet,
    q_incl: &GaussianDist,
    prior_mean: &dyn Fn(&DVector<f64>) -> f64,
    kernel: &dyn Kernel,
) -> Result<(Vec<ConditionalMarginal>, usize)> {
    let m = inducing.len();
    if q_incl.dim() != m {
        return Err(crate::error::Error::shape(format!(
            "sparse_conditional: q(v) dim {} vs {} inducing points",
            q_incl.dim(),
            m
        )));
    }
    let kv = gram(&inducing.z, kernel);
    let kv_chol = robust_cholesky(&kv)?;
    let z_rows: Vec<DVector<f64>> = (0..m).map(|j| inducing.z.row(j).transpose()).collect();
    let mean_z = DVector::from_fn(m, |j, _| prior_mean(&z_rows[j]));
    let centered = q_incl.mean() - &mean_z;

    let mut out = Vec::with_capacity(x_star.nrows());
    let mut clamps = 0usize;
    for i in 0..x_star.nrows() {
        let x = x_star.row(i).transpose();
        let k_star = DVector::from_fn(m, |j, _| kernel.eval(&x, &z_rows[j]));
        let alpha = kv_chol.solve_vec(&k_star);
        let mean = prior_mean(&x) + alpha.dot(&centered);
        let k_ss = kernel.eval(&x, &x);
        let nystrom = alpha.dot(&k_star);
        let correction = alpha.dot(&(q_incl.cov() * &alpha));
        let mut var = k_ss - nystrom + correction;
        if var < 0.0 {
            var = 0.0;
            clamps += 1;
        }
        out.push(ConditionalMarginal { mean, var });
    }
    Ok((out, clamps))
}
