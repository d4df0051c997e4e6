//! Lengthscale fields, deformations, and locally linear `W`-fields.

use nalgebra::{DMatrix, DVector};

use super::sq_dist;
use crate::error::{Error, Result};

/// A field of lengthscale matrices `x -> Delta(x)`, each symmetric PD.
pub trait LengthscaleField {
    fn delta(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// Constant field `Delta(x) = Delta`.
#[derive(Debug, Clone)]
pub struct ConstantField(pub DMatrix<f64>);

impl LengthscaleField for ConstantField {
    fn delta(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.0.clone()
    }
}

/// Field given by an arbitrary callable.
pub struct FnField<F: Fn(&DVector<f64>) -> DMatrix<f64>>(pub F);

impl<F: Fn(&DVector<f64>) -> DMatrix<f64>> LengthscaleField for FnField<F> {
    fn delta(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.0)(x)
    }
}

/// Field defined by nearest-neighbour lookup over user-supplied grid points.
#[derive(Debug, Clone)]
pub struct GridField {
    points: Vec<DVector<f64>>,
    matrices: Vec<DMatrix<f64>>,
}

impl GridField {
    pub fn new(points: Vec<DVector<f64>>, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        if points.is_empty() || points.len() != matrices.len() {
            return Err(Error::invalid(
                "grid field needs one matrix per grid point and at least one point",
            ));
        }
        Ok(GridField { points, matrices })
    }
}

impl LengthscaleField for GridField {
    fn delta(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let nearest = self
            .points
            .iter()
            .enumerate()
            .min_by(|(_, p), (_, q)| {
                sq_dist(p, x)
                    .partial_cmp(&sq_dist(q, x))
                    .expect("finite grid distances")
            })
            .map(|(i, _)| i)
            .expect("non-empty grid");
        self.matrices[nearest].clone()
    }
}

/// A locally linear map field `x -> W(x)` with `W(x)` of shape `Q x D`.
pub trait WField {
    fn out_dim(&self) -> usize;
    fn w(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// Constant `W(x) = W`.
#[derive(Debug, Clone)]
pub struct ConstantW(pub DMatrix<f64>);

impl WField for ConstantW {
    fn out_dim(&self) -> usize {
        self.0.nrows()
    }

    fn w(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.0.clone()
    }
}

/// `W`-field given by an arbitrary callable with declared output dim.
pub struct FnW<F: Fn(&DVector<f64>) -> DMatrix<f64>> {
    pub out_dim: usize,
    pub f: F,
}

impl<F: Fn(&DVector<f64>) -> DMatrix<f64>> WField for FnW<F> {
    fn out_dim(&self) -> usize {
        self.out_dim
    }

    fn w(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.f)(x)
    }
}

/// Lengthscale field induced by a `W`-field, `[W(x)^T W(x)]^{-1}`, computed
/// through the eigendecomposition pseudo-inverse so rank-deficient (pruned)
/// rows do not blow up.
pub struct InducedField<W: WField> {
    pub w_field: W,
    /// Eigenvalues below this threshold are treated as pruned directions.
    pub rank_tol: f64,
}

impl<W: WField> InducedField<W> {
    pub fn new(w_field: W) -> Self {
        InducedField {
            w_field,
            rank_tol: 1e-10,
        }
    }

    /// Eigenvalues of `W(x)^T W(x)` in descending order (the inverse squared
    /// lengthscales of the local metric). Preferred for field exports.
    pub fn metric_eigenvalues(&self, x: &DVector<f64>) -> DVector<f64> {
        let w = self.w_field.w(x);
        let m = w.transpose() * &w;
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
        DVector::from_vec(ev)
    }
}

impl<W: WField> LengthscaleField for InducedField<W> {
    fn delta(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let w = self.w_field.w(x);
        let m = w.transpose() * &w;
        let eig = m.symmetric_eigen();
        let scale = eig.eigenvalues.abs().max().max(1.0);
        let inv = eig.eigenvalues.map(|l| {
            if l > self.rank_tol * scale {
                1.0 / l
            } else {
                0.0
            }
        });
        &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
    }
}

/// A deformation `tau: R^D -> R^Q`.
pub trait Deformation {
    fn out_dim(&self) -> usize;
    fn map(&self, x: &DVector<f64>) -> DVector<f64>;
}

/// Linear deformation `tau(x) = W x`.
#[derive(Debug, Clone)]
pub struct LinearMap(pub DMatrix<f64>);

impl Deformation for LinearMap {
    fn out_dim(&self) -> usize {
        self.0.nrows()
    }

    fn map(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.0 * x
    }
}

/// Locally linear deformation `tau(x) = W(x) x`.
pub struct LocallyLinear<W: WField>(pub W);

impl<W: WField> Deformation for LocallyLinear<W> {
    fn out_dim(&self) -> usize {
        self.0.out_dim()
    }

    fn map(&self, x: &DVector<f64>) -> DVector<f64> {
        self.0.w(x) * x
    }
}

/// Search all triples of `points` for a violation of the triangle inequality
/// in the lengthscale-mixture pseudo-distance `sqrt(delta(a, b))`. Returns the
/// first violating triple `(i, j, k)` with the two sides of the inequality,
/// where `j` is the midpoint: `d(i,k) > d(i,j) + d(j,k)`.
///
/// A rapidly varying field admits violations; a constant field does not.
pub type TriangleViolation = (usize, usize, usize, f64, f64);

pub fn find_lmx_triangle_violation(
    field: &dyn LengthscaleField,
    points: &[DVector<f64>],
) -> Result<Option<TriangleViolation>> {
    let n = points.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let da = field.delta(&points[i]);
            let db = field.delta(&points[j]);
            let avg = (da + db) * 0.5;
            let chol = nalgebra::Cholesky::new(avg)
                .ok_or_else(|| Error::numerical("triangle search: singular Delta(a)+Delta(b)"))?;
            let diff = &points[i] - &points[j];
            let delta = chol.solve(&diff).dot(&diff);
            let d = delta.max(0.0).sqrt();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            for k in (i + 1)..n {
                if k == j {
                    continue;
                }
                let lhs = dist[i * n + k];
                let rhs = dist[i * n + j] + dist[j * n + k];
                if lhs > rhs + 1e-9 {
                    return Ok(Some((i, j, k, lhs, rhs)));
                }
            }
        }
    }
    Ok(None)
}
