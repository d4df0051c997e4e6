use nalgebra::{DMatrix, DVector};

use super::moments::hidden_state;
use super::TdgpModel;
use crate::error::Result;
use crate::kernels::WField;

/// Per-latent-row relevances, normalized so the largest is one, with the two
/// raw components exposed: the hidden kernel variance of the row and the mean
/// square of its prior-mean entries. A pruned row (variance and mean both
/// zero) has relevance zero.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RelevanceProfile {
    pub relevance: DVector<f64>,
    pub kernel_variance: DVector<f64>,
    pub mean_row_meansq: DVector<f64>,
}

pub fn relevance_profile(model: &TdgpModel) -> RelevanceProfile {
    let q_dim = model.latent_dim;
    let de = model.eff_input_dim() as f64;
    let kernel_variance = model.sigma_w_sq.clone();
    let mean_row_meansq = DVector::from_fn(q_dim, |q, _| {
        model.prior_mean_w.row(q).norm_squared() / de
    });
    let raw = DVector::from_fn(q_dim, |q, _| kernel_variance[q] + mean_row_meansq[q]);
    let max = raw.max();
    let relevance = if max > 0.0 { raw / max } else { raw };
    RelevanceProfile {
        relevance,
        kernel_variance,
        mean_row_meansq,
    }
}

/// Posterior-mean latent images `h(x) = E_q[W(x)] x` on a grid, `g x Q`.
pub fn export_latent(model: &TdgpModel, grid: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let st = hidden_state(model, grid)?;
    Ok(st.a)
}

/// Eigenvalues of `E[W(x)]^T E[W(x)]` per grid point, sorted descending —
/// the inverse squared lengthscales of the induced local metric, reported
/// directly so pruned rows need no inversion. `g x D`.
pub fn export_field(model: &TdgpModel, grid: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let st = hidden_state(model, grid)?;
    let de = model.eff_input_dim();
    let g = grid.nrows();
    let mut out = DMatrix::zeros(g, de);
    for i in 0..g {
        let w = DMatrix::from_fn(model.latent_dim, de, |q, d| st.mu_tilde[q][(i, d)]);
        let m = w.transpose() * &w;
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
        for (d, v) in ev.into_iter().enumerate() {
            out[(i, d)] = v;
        }
    }
    Ok(out)
}

/// The posterior-mean `W`-field of a trained model, usable with the
/// deformation kernels and induced lengthscale fields.
pub struct PosteriorMeanW<'a> {
    pub model: &'a TdgpModel,
}

impl WField for PosteriorMeanW<'_> {
    fn out_dim(&self) -> usize {
        self.model.latent_dim
    }

    fn w(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let row = DMatrix::from_fn(1, x.len(), |_, j| x[j]);
        let st = hidden_state(self.model, &row).expect("posterior mean field evaluation");
        DMatrix::from_fn(self.model.latent_dim, self.model.eff_input_dim(), |q, d| {
            st.mu_tilde[q][(0, d)]
        })
    }
}
