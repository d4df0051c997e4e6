use nalgebra::{DMatrix, DVector};

use super::psi::PsiStats;
use super::{unit_se_gram, TdgpModel};
use crate::error::{Error, Result};
use crate::gp::{robust_cholesky, GaussianDist};

/// Collapsed sparse bound with the optimal Gaussian over the inducing
/// outputs, as a function of the expected-kernel statistics. With
/// `Sigma = noise * K_u + Psi2`:
///
/// ```text
/// F = - n/2 ln(2 pi noise) + m/2 ln(noise)
///     - 1/2 ln det Sigma + 1/2 ln det K_u
///     - 1/(2 noise) (y^T y + psi0 - tr(K_u^{-1} Psi2))
///     + 1/(2 noise) y^T Psi1 Sigma^{-1} Psi1^T y
/// ```
#[derive(Debug)]
pub(crate) struct BoundState {
    pub value: f64,
    /// Jittered `K_u` actually used.
    pub ku: DMatrix<f64>,
    pub ku_inv: DMatrix<f64>,
    pub sig_inv: DMatrix<f64>,
    /// `Sigma^{-1} Psi1^T y`.
    pub b: DVector<f64>,
    pub kinv_psi2_kinv: DMatrix<f64>,
    pub tr_kinv_psi2: f64,
    /// `y^T Psi1 Sigma^{-1} Psi1^T y`.
    pub quad: f64,
    pub yy: f64,
    pub lndet_sigma: f64,
    pub lndet_ku: f64,
    pub jitter_ku: f64,
    pub jitter_sigma: f64,
}

pub(crate) fn collapsed_bound_core(
    ku_raw: &DMatrix<f64>,
    psi: &PsiStats,
    noise_sq: f64,
    y: &DVector<f64>,
) -> Result<BoundState> {
    let n = y.len();
    let m = ku_raw.nrows();
    if psi.psi1.shape() != (n, m) || psi.psi2.shape() != (m, m) {
        return Err(Error::shape("collapsed bound: Psi shapes do not match"));
    }
    if !(noise_sq > 0.0) {
        return Err(Error::invalid("noise variance must be positive"));
    }
    let ku_chol = robust_cholesky(ku_raw)?;
    let mut ku = ku_raw.clone();
    for i in 0..m {
        ku[(i, i)] += ku_chol.jitter;
    }
    let sigma = &ku * noise_sq + &psi.psi2;
    let sig_chol = robust_cholesky(&sigma)?;

    let psi1t_y = psi.psi1.transpose() * y;
    let b = sig_chol.solve_vec(&psi1t_y);
    let quad = psi1t_y.dot(&b);
    let kinv_psi2 = ku_chol.solve_mat(&psi.psi2);
    let tr_kinv_psi2 = kinv_psi2.trace();
    let ku_inv = ku_chol.inverse();
    let sig_inv = sig_chol.inverse();
    let kinv_psi2_kinv = &kinv_psi2 * &ku_inv;
    let yy = y.norm_squared();
    let lndet_sigma = sig_chol.ln_det();
    let lndet_ku = ku_chol.ln_det();

    let nf = n as f64;
    let mf = m as f64;
    let value = -0.5 * nf * (2.0 * std::f64::consts::PI * noise_sq).ln() + 0.5 * mf * noise_sq.ln()
        - 0.5 * lndet_sigma
        + 0.5 * lndet_ku
        - (yy + psi.psi0 - tr_kinv_psi2) / (2.0 * noise_sq)
        + quad / (2.0 * noise_sq);

    Ok(BoundState {
        value,
        ku,
        ku_inv,
        sig_inv,
        b,
        kinv_psi2_kinv,
        tr_kinv_psi2,
        quad,
        yy,
        lndet_sigma,
        lndet_ku,
        jitter_ku: ku_chol.jitter,
        jitter_sigma: sig_chol.jitter,
    })
}

#[derive(Debug)]
pub(crate) struct BoundAdjoints {
    pub g_ku: DMatrix<f64>,
    pub g_psi1: DMatrix<f64>,
    pub g_psi2: DMatrix<f64>,
    pub g_psi0: f64,
    pub g_noise_sq: f64,
}

pub(crate) fn collapsed_bound_adjoints(
    st: &BoundState,
    psi: &PsiStats,
    noise_sq: f64,
    y: &DVector<f64>,
) -> BoundAdjoints {
    let n = y.len() as f64;
    let m = st.ku.nrows() as f64;
    let inv2s = 1.0 / (2.0 * noise_sq);

    // dF/dSigma with Sigma treated as free symmetric input.
    let bbt = &st.b * st.b.transpose();
    let g_sigma = st.sig_inv.scale(-0.5) - bbt.scale(inv2s);

    let g_psi2 = &g_sigma + st.ku_inv.scale(inv2s);
    let g_ku = g_sigma.scale(noise_sq) + st.ku_inv.scale(0.5) - st.kinv_psi2_kinv.scale(inv2s);
    let g_psi1 = y * st.b.transpose() / noise_sq;
    let g_psi0 = -inv2s;

    let tr_gsig_ku = g_sigma.component_mul(&st.ku).sum();
    let inv2s2 = 1.0 / (2.0 * noise_sq * noise_sq);
    let g_noise_sq = -(n - m) / (2.0 * noise_sq)
        + tr_gsig_ku
        + (st.yy + psi.psi0 - st.tr_kinv_psi2) * inv2s2
        - st.quad * inv2s2;

    BoundAdjoints {
        g_ku,
        g_psi1,
        g_psi2,
        g_psi0,
        g_noise_sq,
    }
}

/// Unit-variance output gram on the pseudo-inputs (pre-jitter).
pub(crate) fn output_gram(model: &TdgpModel) -> DMatrix<f64> {
    let q = model.latent_dim;
    let ones = DVector::from_element(q, 1.0);
    unit_se_gram(&model.z_out, &ones)
}

/// The closed-form optimal Gaussian over the inducing outputs,
/// `mean = K_u Sigma^{-1} Psi1^T y`, `cov = noise K_u Sigma^{-1} K_u`.
pub fn optimal_qu(model: &TdgpModel, psi: &PsiStats, y: &DVector<f64>) -> Result<GaussianDist> {
    let ku_raw = output_gram(model);
    let st = collapsed_bound_core(&ku_raw, psi, model.noise_sq, y)?;
    let mean = &st.ku * &st.b;
    let half = &st.sig_inv * &st.ku;
    let cov = (&st.ku * &half).scale(model.noise_sq);
    let cov_sym = (&cov + cov.transpose()).scale(0.5);
    GaussianDist::new(mean, cov_sym)
}
