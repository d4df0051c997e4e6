//! Covariance functions: anisotropic squared exponential, lengthscale-mixture
//! kernels over a matrix-valued lengthscale field, and deformation kernels
//! built from locally linear maps `x -> W(x) x`.

pub mod derivative;
pub mod field;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::robust_cholesky;

pub use derivative::{derivative_variance_1d, DerivativeKernelKind};
pub use field::{
    find_lmx_triangle_violation, ConstantField, ConstantW, Deformation, FnField, FnW, GridField,
    InducedField, LengthscaleField, LinearMap, LocallyLinear, WField,
};

/// A covariance function over `R^D` inputs.
pub trait Kernel {
    fn eval(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64;
}

impl<F: Fn(&DVector<f64>, &DVector<f64>) -> f64> Kernel for F {
    fn eval(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        self(a, b)
    }
}

/// Lengthscale matrix of an anisotropic SE kernel.
///
/// Diagonal (ARD) matrices are stored through the log of their diagonal and
/// full matrices through their lower Cholesky factor, so both stay positive
/// definite under unconstrained updates.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum LengthscaleMatrix {
    /// log of the diagonal entries of a diagonal lengthscale matrix.
    ArdLog(DVector<f64>),
    /// Lower Cholesky factor `L` of a full lengthscale matrix `L L^T`.
    FullChol(DMatrix<f64>),
}

impl LengthscaleMatrix {
    /// Diagonal matrix with the given (positive) entries.
    pub fn ard(diag: &DVector<f64>) -> Result<Self> {
        if diag.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid(
                "ARD lengthscale entries must be positive and finite",
            ));
        }
        Ok(LengthscaleMatrix::ArdLog(diag.map(f64::ln)))
    }

    /// Isotropic matrix `l2 * I` in `dim` dimensions.
    pub fn isotropic(l2: f64, dim: usize) -> Result<Self> {
        Self::ard(&DVector::from_element(dim, l2))
    }

    /// Full symmetric positive-definite matrix; fails if it is not PD.
    pub fn full(delta: &DMatrix<f64>) -> Result<Self> {
        let sym_err = (delta - delta.transpose()).abs().max();
        if sym_err > 1e-10 * (1.0 + delta.abs().max()) {
            return Err(Error::invalid("lengthscale matrix must be symmetric"));
        }
        let chol = nalgebra::Cholesky::new(delta.clone())
            .ok_or_else(|| Error::invalid("lengthscale matrix must be positive definite"))?;
        Ok(LengthscaleMatrix::FullChol(chol.l()))
    }

    pub fn dim(&self) -> usize {
        match self {
            LengthscaleMatrix::ArdLog(d) => d.len(),
            LengthscaleMatrix::FullChol(l) => l.nrows(),
        }
    }

    /// Materialize the matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            LengthscaleMatrix::ArdLog(d) => DMatrix::from_diagonal(&d.map(f64::exp)),
            LengthscaleMatrix::FullChol(l) => l * l.transpose(),
        }
    }

    /// Quadratic form `v^T Delta^{-1} v`.
    pub fn inv_quad(&self, v: &DVector<f64>) -> f64 {
        match self {
            LengthscaleMatrix::ArdLog(d) => v
                .iter()
                .zip(d.iter())
                .map(|(&vi, &ld)| vi * vi * (-ld).exp())
                .sum(),
            LengthscaleMatrix::FullChol(l) => {
                let w = l
                    .clone()
                    .solve_lower_triangular(v)
                    .expect("Cholesky factor has positive diagonal");
                w.norm_squared()
            }
        }
    }
}

/// Parameters of the anisotropic squared exponential kernel: a signal
/// variance and a lengthscale matrix.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SeParams {
    pub variance: f64,
    pub lengthscale: LengthscaleMatrix,
}

impl SeParams {
    pub fn new(variance: f64, lengthscale: LengthscaleMatrix) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::invalid("signal variance must be positive"));
        }
        Ok(SeParams {
            variance,
            lengthscale,
        })
    }

    /// Unit-variance, identity-lengthscale parameters in `dim` dimensions.
    pub fn unit(dim: usize) -> Self {
        SeParams {
            variance: 1.0,
            lengthscale: LengthscaleMatrix::ArdLog(DVector::zeros(dim)),
        }
    }
}

/// Isotropic profile kinds. Only the squared exponential is supported; the
/// closed-form expected-kernel statistics require it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ProfileKind {
    SquaredExponential,
}

/// An isotropic kernel profile evaluated on *squared* distances,
/// `pi(d2) = variance * exp(-d2 / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IsotropicProfile {
    pub kind: ProfileKind,
    pub variance: f64,
}

impl IsotropicProfile {
    pub fn se(variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::invalid("profile variance must be positive"));
        }
        Ok(IsotropicProfile {
            kind: ProfileKind::SquaredExponential,
            variance,
        })
    }

    pub fn eval(&self, d2: f64) -> f64 {
        match self.kind {
            ProfileKind::SquaredExponential => self.variance * (-0.5 * d2).exp(),
        }
    }
}

/// Squared Euclidean distance with negative round-off clamped at zero.
pub(crate) fn sq_dist(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    acc.max(0.0)
}

/// Anisotropic squared exponential kernel
/// `variance * exp(-1/2 (a-b)^T Delta^{-1} (a-b))`.
pub fn se_kernel(a: &DVector<f64>, b: &DVector<f64>, p: &SeParams) -> Result<f64> {
    if a.len() != b.len() || a.len() != p.lengthscale.dim() {
        return Err(Error::shape(format!(
            "se_kernel: input dims {} / {} vs lengthscale dim {}",
            a.len(),
            b.len(),
            p.lengthscale.dim()
        )));
    }
    let d = a - b;
    Ok(p.variance * (-0.5 * p.lengthscale.inv_quad(&d)).exp())
}

/// Lengthscale-mixture kernel over a field of lengthscale matrices:
///
/// `det(D(a))^{1/4} det(D(b))^{1/4} det((D(a)+D(b))/2)^{-1/2} pi(delta)`
/// with `delta = 2 (a-b)^T (D(a)+D(b))^{-1} (a-b)`.
///
/// Reduces exactly to the stationary kernel when the field is constant.
pub fn lengthscale_mixture_kernel(
    a: &DVector<f64>,
    b: &DVector<f64>,
    field: &dyn LengthscaleField,
    profile: &IsotropicProfile,
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("lengthscale_mixture_kernel: input dims differ"));
    }
    let da = field.delta(a);
    let db = field.delta(b);
    let ln_det = |m: &DMatrix<f64>, what: &str| -> Result<f64> {
        let chol = nalgebra::Cholesky::new(m.clone()).ok_or_else(|| {
            Error::numerical(format!(
                "lengthscale_mixture_kernel: {what} not positive definite (dim {})",
                m.nrows()
            ))
        })?;
        Ok(2.0 * chol.l().diagonal().map(f64::ln).sum())
    };
    let ld_a = ln_det(&da, "Delta(a)")?;
    let ld_b = ln_det(&db, "Delta(b)")?;
    let avg = (&da + &db) * 0.5;
    let chol_avg = nalgebra::Cholesky::new(avg).ok_or_else(|| {
        Error::numerical("lengthscale_mixture_kernel: Delta(a)+Delta(b) is singular")
    })?;
    let ld_avg = 2.0 * chol_avg.l().diagonal().map(f64::ln).sum();
    let diff = a - b;
    let delta = chol_avg.solve(&diff).dot(&diff); // (a-b)^T ((Da+Db)/2)^{-1} (a-b) = delta/2 * ... see below
    // chol_avg factors (Da+Db)/2, so the solve already carries the factor 2 of
    // delta = 2 (a-b)^T (Da+Db)^{-1} (a-b).
    let log_pre = 0.25 * ld_a + 0.25 * ld_b - 0.5 * ld_avg;
    Ok(log_pre.exp() * profile.eval(delta))
}

/// Deformation kernel `pi(||tau(a) - tau(b)||^2)` for a locally linear map
/// `tau(x) = W(x) x`.
pub fn tdgp_kernel(
    a: &DVector<f64>,
    b: &DVector<f64>,
    w_field: &dyn WField,
    profile: &IsotropicProfile,
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("tdgp_kernel: input dims differ"));
    }
    let ia = apply_w(w_field, a)?;
    let ib = apply_w(w_field, b)?;
    Ok(profile.eval(sq_dist(&ia, &ib)))
}

pub(crate) fn apply_w(w_field: &dyn WField, x: &DVector<f64>) -> Result<DVector<f64>> {
    let w = w_field.w(x);
    if w.ncols() != x.len() {
        return Err(Error::shape(format!(
            "W(x) has {} columns for input dim {}",
            w.ncols(),
            x.len()
        )));
    }
    if w.nrows() != w_field.out_dim() {
        return Err(Error::shape(format!(
            "W(x) has {} rows, declared output dim {}",
            w.nrows(),
            w_field.out_dim()
        )));
    }
    Ok(&w * x)
}

/// Gram matrix of a kernel on a point set (rows of `points`).
pub fn gram(points: &DMatrix<f64>, kernel: &dyn Kernel) -> DMatrix<f64> {
    let n = points.nrows();
    let rows: Vec<DVector<f64>> = (0..n).map(|i| points.row(i).transpose()).collect();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&rows[i], &rows[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Gram matrix factored under the escalating-jitter policy.
pub fn gram_factored(
    points: &DMatrix<f64>,
    kernel: &dyn Kernel,
) -> Result<(DMatrix<f64>, crate::gp::RobustCholesky)> {
    let g = gram(points, kernel);
    let chol = robust_cholesky(&g)?;
    Ok((g, chol))
}
