use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Jitter ladder: a clean attempt first, then decade steps up to the cap.
const JITTERS: [f64; 8] = [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2];

/// Cholesky factorization of `A + eps I` with escalating jitter `eps`.
#[derive(Debug, Clone)]
pub struct RobustCholesky {
    chol: Cholesky<f64, Dyn>,
    /// Jitter that was actually applied.
    pub jitter: f64,
}

/// Factor a symmetric matrix, adding jitter in decade steps `1e-8 ..= 1e-2`
/// until the factorization succeeds.
pub fn robust_cholesky(a: &DMatrix<f64>) -> Result<RobustCholesky> {
    if a.nrows() != a.ncols() {
        return Err(Error::shape(format!(
            "robust_cholesky: matrix is {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = 1.0 + a.abs().max();
    let sym_err = (a - a.transpose()).abs().max();
    if sym_err > 1e-8 * scale {
        return Err(Error::numerical(format!(
            "robust_cholesky: matrix not symmetric (max asymmetry {sym_err:.3e})"
        )));
    }
    for &eps in JITTERS.iter() {
        let mut m = a.clone();
        if eps > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += eps;
            }
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok(RobustCholesky { chol, jitter: eps });
        }
    }
    let diag = a.diagonal();
    Err(Error::numerical(format!(
        "robust_cholesky: failed at maximum jitter 1e-2 (dim {}, diag in [{:.3e}, {:.3e}], max |A| {:.3e})",
        a.nrows(),
        diag.min(),
        diag.max(),
        a.abs().max()
    )))
}

impl RobustCholesky {
    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Lower triangular factor `L` with `L L^T = A + eps I`.
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// `L^{-1} b` (forward substitution).
    pub fn forward_sub(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("Cholesky factor has positive diagonal")
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// `ln det (A + eps I)`.
    pub fn ln_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().map(f64::ln).sum()
    }

    /// Quadratic form `b^T (A + eps I)^{-1} b`.
    pub fn inv_quad(&self, b: &DVector<f64>) -> f64 {
        self.forward_sub(b).norm_squared()
    }
}
