use nalgebra::{DMatrix, DVector};

use super::bound::collapsed_bound_core;
use super::moments::hidden_state;
use super::psi::{psi1_from_moments, psi2_from_moments, PsiStats};
use super::TdgpModel;
use crate::error::Result;
use crate::gp::VARIANCE_FLOOR;

/// Moment-matched predictive at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    /// Variance of the latent function value.
    pub var_latent: f64,
    /// Latent variance plus the likelihood noise.
    pub var_observed: f64,
}

/// Posterior pieces shared by the uncertain-feature and deterministic-feature
/// models: the optimal Gaussian over inducing outputs, reduced to the three
/// matrices prediction needs.
#[derive(Debug, Clone)]
pub(crate) struct SparsePosteriorCore {
    pub sigma_f_sq: f64,
    /// `K_u^{-1} mu_u` (equals `Sigma^{-1} Psi1^T y`).
    pub w: DVector<f64>,
    /// `K_u^{-1}`.
    pub p: DMatrix<f64>,
    /// `K_u^{-1} Sigma_u K_u^{-1}` (equals `noise * Sigma^{-1}`).
    pub c: DMatrix<f64>,
    pub mu_u: DVector<f64>,
    pub sigma_u: DMatrix<f64>,
}

impl SparsePosteriorCore {
    pub fn new(
        ku_raw: &DMatrix<f64>,
        sigma_f_sq: f64,
        noise_sq: f64,
        psi: &PsiStats,
        y: &DVector<f64>,
    ) -> Result<Self> {
        let st = collapsed_bound_core(ku_raw, psi, noise_sq, y)?;
        let mu_u = &st.ku * &st.b;
        let sigma_u = (&st.ku * (&st.sig_inv * &st.ku)).scale(noise_sq);
        Ok(SparsePosteriorCore {
            sigma_f_sq,
            w: st.b.clone(),
            p: st.ku_inv.clone(),
            c: st.sig_inv.scale(noise_sq),
            mu_u,
            sigma_u: (&sigma_u + sigma_u.transpose()).scale(0.5),
        })
    }

    /// Mean and (unclamped) latent variance from the per-point statistics:
    ///
    /// `E[f*] = Psi1* K^{-1} mu`
    /// `Var[f*] = psi0* - tr(K^{-1} Psi2*) + tr(K^{-1} Sigma_u K^{-1} Psi2*)
    ///            + mu^T K^{-1}(Psi2* - Psi1*^T Psi1*) K^{-1} mu`
    pub fn predict_point(&self, psi1_row: &DVector<f64>, psi2_pt: &DMatrix<f64>) -> (f64, f64) {
        let mean = psi1_row.dot(&self.w);
        let tr_p = self.p.component_mul(psi2_pt).sum();
        let tr_c = self.c.component_mul(psi2_pt).sum();
        let quad = (psi2_pt * &self.w).dot(&self.w);
        let var = self.sigma_f_sq - tr_p + tr_c + quad - mean * mean;
        (mean, var)
    }
}

/// Trained-model posterior over the inducing outputs, ready for prediction.
#[derive(Debug, Clone)]
pub struct TdgpPosterior {
    pub model: TdgpModel,
    core: SparsePosteriorCore,
}

impl TdgpPosterior {
    /// Build the optimal `q(u)` from the training batch.
    pub fn new(model: TdgpModel, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        let psi = super::psi::psi_stats(&model, x)?;
        let ku_raw = super::bound::output_gram(&model);
        let core = SparsePosteriorCore::new(&ku_raw, model.sigma_f_sq, model.noise_sq, &psi, y)?;
        Ok(TdgpPosterior { model, core })
    }

    pub fn mu_u(&self) -> &DVector<f64> {
        &self.core.mu_u
    }

    pub fn sigma_u(&self) -> &DMatrix<f64> {
        &self.core.sigma_u
    }

    /// Moment-matched predictive marginals at the rows of `x_star`; the
    /// second return value counts latent variances clamped at the floor.
    pub fn predict(&self, x_star: &DMatrix<f64>) -> Result<(Vec<Prediction>, usize)> {
        let st = hidden_state(&self.model, x_star)?;
        let sigma_f = self.model.sigma_f_sq.sqrt();
        let mut out = Vec::with_capacity(x_star.nrows());
        let mut clamps = 0usize;
        for i in 0..x_star.nrows() {
            let a_i = DMatrix::from_fn(1, self.model.latent_dim, |_, q| st.a[(i, q)]);
            let s_i = DMatrix::from_fn(1, self.model.latent_dim, |_, q| st.s[(i, q)]);
            let psi1_pt = psi1_from_moments(&a_i, &s_i, &self.model.z_out, sigma_f)
                .row(0)
                .transpose();
            let psi2_pt = psi2_from_moments(&a_i, &s_i, &self.model.z_out, self.model.sigma_f_sq);
            let (mean, var_raw) = self.core.predict_point(&psi1_pt, &psi2_pt);
            let var_latent = if var_raw < VARIANCE_FLOOR {
                clamps += 1;
                VARIANCE_FLOOR
            } else {
                var_raw
            };
            out.push(Prediction {
                mean,
                var_latent,
                var_observed: var_latent + self.model.noise_sq,
            });
        }
        Ok((out, clamps))
    }
}
