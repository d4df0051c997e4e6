use nalgebra::{DMatrix, DVector};

use super::chol::{robust_cholesky, RobustCholesky};
use crate::error::{Error, Result};

/// A multivariate Gaussian stored together with the factorization of its
/// covariance (obtained under the escalating jitter policy).
#[derive(Debug, Clone)]
pub struct GaussianDist {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: RobustCholesky,
}

impl GaussianDist {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if mean.len() != cov.nrows() || cov.nrows() != cov.ncols() {
            return Err(Error::shape(format!(
                "GaussianDist: mean len {} vs covariance {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        let chol = robust_cholesky(&cov)?;
        Ok(GaussianDist { mean, cov, chol })
    }

    pub fn standard(dim: usize) -> Self {
        Self::new(DVector::zeros(dim), DMatrix::identity(dim, dim))
            .expect("identity covariance factors cleanly")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn chol(&self) -> &RobustCholesky {
        &self.chol
    }
}

/// `KL(q || p)` between Gaussians in closed form.
pub fn gaussian_kl(q: &GaussianDist, p: &GaussianDist) -> Result<f64> {
    let m = q.dim();
    if p.dim() != m {
        return Err(Error::shape(format!(
            "gaussian_kl: dims {} vs {}",
            m,
            p.dim()
        )));
    }
    let trace = p.chol.solve_mat(&q.cov).trace();
    let dmean = p.mean() - q.mean();
    let quad = p.chol.inv_quad(&dmean);
    let ln_det_diff = p.chol.ln_det() - q.chol.ln_det();
    Ok(0.5 * (trace + quad - m as f64 + ln_det_diff))
}
