use nalgebra::{DMatrix, DVector};

use super::bound::{collapsed_bound_adjoints, collapsed_bound_core, output_gram};
use super::moments::{hidden_state, HiddenState};
use super::psi::{psi1_adjoint, psi1_from_moments, psi2_adjoint, psi2_from_moments, PsiStats};
use super::TdgpModel;
use crate::error::Result;

/// Per-term diagnostics of one bound evaluation.
#[derive(Debug, Clone)]
pub struct ElboTerms {
    pub elbo: f64,
    /// Collapsed sparse-GP part (expected likelihood minus the output-layer
    /// KL, with the optimal Gaussian substituted).
    pub blue_box: f64,
    /// Sum of the hidden-layer KL divergences over rows and output dims.
    pub kl_hidden: f64,
    pub psi0: f64,
    /// Nystrom residual `psi0 - tr(K_u^{-1} Psi2)`.
    pub trace_residual: f64,
    /// `y^T Psi1 Sigma^{-1} Psi1^T y`.
    pub quad: f64,
    pub lndet_sigma: f64,
    pub lndet_ku: f64,
    pub jitter_ku: f64,
    pub jitter_r: f64,
    pub jitter_sigma: f64,
}

/// Gradients of the ELBO w.r.t. the constrained parameter values, mirroring
/// the model layout.
#[derive(Debug, Clone)]
pub(crate) struct TdgpGrad {
    pub sigma_f_sq: f64,
    pub noise_sq: f64,
    pub sigma_w_sq: DVector<f64>,
    pub lengthscales: DVector<f64>,
    pub prior_mean_w: DMatrix<f64>,
    pub z_out: DMatrix<f64>,
    pub z_hidden: DMatrix<f64>,
    pub q_mu: Vec<DMatrix<f64>>,
    pub q_sigma_chol: Vec<DMatrix<f64>>,
}

struct KlState {
    total: f64,
    p: DMatrix<f64>,
}

fn kl_forward(model: &TdgpModel, st: &HiddenState) -> KlState {
    let m_v = model.num_inducing_hidden();
    let de = model.eff_input_dim();
    let p = st.r_chol.inverse();
    let lndet_r = st.r_chol.ln_det();
    let mut total = 0.0;
    for q in 0..model.latent_dim {
        let sw = model.sigma_w_sq[q];
        let l = &model.q_sigma_chol[q];
        let sigma_q = l * l.transpose();
        let tr_ps = p.component_mul(&sigma_q).sum();
        let lndet_sq = 2.0 * l.diagonal().map(f64::ln).sum();
        let mut quad = 0.0;
        for d in 0..de {
            let delta = DVector::from_fn(m_v, |j, _| {
                model.q_mu[q][(j, d)] - model.prior_mean_w[(q, d)]
            });
            quad += (&p * &delta).dot(&delta);
        }
        total += 0.5
            * (de as f64 * (tr_ps / sw - m_v as f64 + m_v as f64 * sw.ln() + lndet_r - lndet_sq)
                + quad / sw);
    }
    KlState { total, p }
}

/// The collapsed evidence lower bound at the current parameters, with
/// per-term diagnostics.
pub fn collapsed_elbo(model: &TdgpModel, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(f64, ElboTerms)> {
    model.validate()?;
    let st = hidden_state(model, x)?;
    let sigma_f = model.sigma_f_sq.sqrt();
    let psi = PsiStats {
        psi0: x.nrows() as f64 * model.sigma_f_sq,
        psi1: psi1_from_moments(&st.a, &st.s, &model.z_out, sigma_f),
        psi2: psi2_from_moments(&st.a, &st.s, &model.z_out, model.sigma_f_sq),
    };
    let ku_raw = output_gram(model);
    let bs = collapsed_bound_core(&ku_raw, &psi, model.noise_sq, y)?;
    let kl = kl_forward(model, &st);
    let elbo = bs.value - kl.total;
    let terms = ElboTerms {
        elbo,
        blue_box: bs.value,
        kl_hidden: kl.total,
        psi0: psi.psi0,
        trace_residual: psi.psi0 - bs.tr_kinv_psi2,
        quad: bs.quad,
        lndet_sigma: bs.lndet_sigma,
        lndet_ku: bs.lndet_ku,
        jitter_ku: bs.jitter_ku,
        jitter_r: st.r_chol.jitter,
        jitter_sigma: bs.jitter_sigma,
    };
    Ok((elbo, terms))
}

/// ELBO plus its exact gradient w.r.t. every constrained parameter.
pub(crate) fn collapsed_elbo_grad(
    model: &TdgpModel,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(f64, ElboTerms, TdgpGrad)> {
    let st = hidden_state(model, x)?;
    let n = st.x.nrows();
    let de = model.eff_input_dim();
    let q_dim = model.latent_dim;
    let m_u = model.num_inducing_out();
    let m_v = model.num_inducing_hidden();
    let sigma_f = model.sigma_f_sq.sqrt();

    let psi = PsiStats {
        psi0: n as f64 * model.sigma_f_sq,
        psi1: psi1_from_moments(&st.a, &st.s, &model.z_out, sigma_f),
        psi2: psi2_from_moments(&st.a, &st.s, &model.z_out, model.sigma_f_sq),
    };
    let ku_raw = output_gram(model);
    let bs = collapsed_bound_core(&ku_raw, &psi, model.noise_sq, y)?;
    let kl = kl_forward(model, &st);
    let elbo = bs.value - kl.total;
    let terms = ElboTerms {
        elbo,
        blue_box: bs.value,
        kl_hidden: kl.total,
        psi0: psi.psi0,
        trace_residual: psi.psi0 - bs.tr_kinv_psi2,
        quad: bs.quad,
        lndet_sigma: bs.lndet_sigma,
        lndet_ku: bs.lndet_ku,
        jitter_ku: bs.jitter_ku,
        jitter_r: st.r_chol.jitter,
        jitter_sigma: bs.jitter_sigma,
    };

    // ---- blue box -> (Psi1, Psi2, psi0, K_u, noise) ----
    let adj = collapsed_bound_adjoints(&bs, &psi, model.noise_sq, y);
    let (ga1, gs1, gz1, g_sigma_f) =
        psi1_adjoint(&st.a, &st.s, &model.z_out, sigma_f, &psi.psi1, &adj.g_psi1);
    let (ga2, gs2, gz2, g_sf2_psi2) =
        psi2_adjoint(&st.a, &st.s, &model.z_out, model.sigma_f_sq, &adj.g_psi2);
    let ga = ga1 + ga2;
    let gs = gs1 + gs2;

    let mut g_z_out = gz1 + gz2;
    // K_u entries depend on the output pseudo-inputs (unit SE in latent space).
    for j in 0..m_u {
        for k in 0..m_u {
            if j == k {
                continue;
            }
            let c = adj.g_ku[(j, k)] * bs.ku[(j, k)];
            if c == 0.0 {
                continue;
            }
            for q in 0..q_dim {
                let diff = model.z_out[(j, q)] - model.z_out[(k, q)];
                g_z_out[(j, q)] -= c * diff;
                g_z_out[(k, q)] += c * diff;
            }
        }
    }

    let g_sigma_f_sq =
        g_sigma_f / (2.0 * sigma_f) + g_sf2_psi2 + n as f64 * adj.g_psi0;
    let g_noise_sq = adj.g_noise_sq;

    // ---- projected moments -> hidden marginals ----
    // a_iq = mu_tilde_q[i, .] . x_i ; s_iq = cond_var_iq ||x_i||^2
    let mut g_cond_var = DMatrix::zeros(n, q_dim);
    for i in 0..n {
        for q in 0..q_dim {
            g_cond_var[(i, q)] = gs[(i, q)] * st.x_sqnorm[i];
        }
    }

    let row_sum_a = DVector::from_fn(n, |i, _| st.a_mat.row(i).sum());
    let mut g_a_mat = DMatrix::zeros(n, m_v);
    let mut g_r = DMatrix::zeros(n, m_v);
    let mut g_nystrom = DVector::<f64>::zeros(n);
    let mut g_sigma_w_sq = DVector::zeros(q_dim);
    let mut g_prior_mean = DMatrix::zeros(q_dim, de);
    let mut g_q_mu: Vec<DMatrix<f64>> = Vec::with_capacity(q_dim);
    let mut g_q_l: Vec<DMatrix<f64>> = Vec::with_capacity(q_dim);
    // Accumulated free-entry gradient on R (the unit gram on Z_w).
    let mut g_r_gram = DMatrix::zeros(m_v, m_v);

    for q in 0..q_dim {
        let sw = model.sigma_w_sq[q];
        let l_q = &model.q_sigma_chol[q];

        // gradient wrt mu_tilde_q: (i, d) -> ga[(i,q)] * x[(i,d)]
        let mut g_mu_tilde = DMatrix::zeros(n, de);
        for i in 0..n {
            let g = ga[(i, q)];
            if g != 0.0 {
                for d in 0..de {
                    g_mu_tilde[(i, d)] = g * st.x[(i, d)];
                }
            }
        }

        // mean path: mu_tilde = A (M - 1 mu^T) + 1 mu^T
        let mut centered = model.q_mu[q].clone();
        for d in 0..de {
            let m = model.prior_mean_w[(q, d)];
            for j in 0..m_v {
                centered[(j, d)] -= m;
            }
        }
        g_a_mat += &g_mu_tilde * centered.transpose();
        let mut g_mu_q = st.a_mat.transpose() * &g_mu_tilde;
        for d in 0..de {
            let mut acc = 0.0;
            for i in 0..n {
                acc += g_mu_tilde[(i, d)] * (1.0 - row_sum_a[i]);
            }
            g_prior_mean[(q, d)] += acc;
        }

        // variance path: cond_var = sw (1 - nystrom) + rowsq(A L_q)
        let t_q = &st.a_mat * l_q;
        let g_col = g_cond_var.column(q);
        for i in 0..n {
            let g = g_col[i];
            g_sigma_w_sq[q] += g * (1.0 - st.nystrom[i]);
            g_nystrom[i] -= g * sw;
        }
        // dA += 2 diag(g) T L^T ; dL += 2 A^T diag(g) T
        let weighted_t = DMatrix::from_fn(n, m_v, |i, k| 2.0 * g_col[i] * t_q[(i, k)]);
        g_a_mat += &weighted_t * l_q.transpose();
        let mut g_l = st.a_mat.transpose() * &weighted_t;
        for a_idx in 0..m_v {
            for b_idx in (a_idx + 1)..m_v {
                g_l[(a_idx, b_idx)] = 0.0; // upper triangle is not a parameter
            }
        }

        // ---- hidden KL (subtracted from the bound) ----
        let sigma_q = l_q * l_q.transpose();
        let tr_ps = kl.p.component_mul(&sigma_q).sum();
        let l_inv = l_q
            .clone()
            .solve_lower_triangular(&DMatrix::identity(m_v, m_v))
            .expect("variational factor has positive diagonal");
        let sigma_q_inv = l_inv.transpose() * &l_inv;
        // d(-KL)/dSigma_q = -(D/2)(P / sw - Sigma_q^{-1})
        let g_sigma_kl = (&kl.p / sw - &sigma_q_inv).scale(-0.5 * de as f64);
        let mut g_l_kl = g_sigma_kl.scale(2.0) * l_q;
        for a_idx in 0..m_v {
            for b_idx in (a_idx + 1)..m_v {
                g_l_kl[(a_idx, b_idx)] = 0.0;
            }
        }
        g_l += g_l_kl;

        let mut quad_sum = 0.0;
        let mut p_delta_outer = DMatrix::zeros(m_v, m_v);
        for d in 0..de {
            let delta = DVector::from_fn(m_v, |j, _| {
                model.q_mu[q][(j, d)] - model.prior_mean_w[(q, d)]
            });
            let p_delta = &kl.p * &delta;
            quad_sum += p_delta.dot(&delta);
            // d(-KL)/d q_mu[:,d] = -P delta / sw
            for j in 0..m_v {
                g_mu_q[(j, d)] -= p_delta[j] / sw;
            }
            g_prior_mean[(q, d)] += p_delta.sum() / sw;
            p_delta_outer += &p_delta * p_delta.transpose();
        }
        // d(-KL)/d sw = (D/2) tr(P Sigma_q)/sw^2 - D m_v/(2 sw) + quad/(2 sw^2)
        g_sigma_w_sq[q] += 0.5 * de as f64 * tr_ps / (sw * sw) - 0.5 * de as f64 * m_v as f64 / sw
            + 0.5 * quad_sum / (sw * sw);
        // d(-KL)/dR = (D/2) P Sigma_q P / sw - (D/2) P + P dd^T P / (2 sw)
        let p_sig_p = &kl.p * &sigma_q * &kl.p;
        g_r_gram += p_sig_p.scale(0.5 * de as f64 / sw) - kl.p.scale(0.5 * de as f64)
            + p_delta_outer.scale(0.5 / sw);

        g_q_mu.push(g_mu_q);
        g_q_l.push(g_l);
    }

    // nystrom: d_i = sum_j A_ij r_ij
    for i in 0..n {
        let g = g_nystrom[i];
        if g == 0.0 {
            continue;
        }
        for j in 0..m_v {
            g_a_mat[(i, j)] += g * st.r[(i, j)];
            g_r[(i, j)] += g * st.a_mat[(i, j)];
        }
    }

    // A = r P with P = (R + jit)^{-1}: dr += dA P ; dR += -A^T dA P
    g_r += &g_a_mat * &kl.p;
    g_r_gram += (st.a_mat.transpose() * &g_a_mat * &kl.p).scale(-1.0);

    // ---- kernel matrices -> (z_hidden, lengthscales) ----
    let mut g_z_hidden = DMatrix::zeros(m_v, de);
    let mut g_lengthscales = DVector::zeros(de);
    for i in 0..n {
        for j in 0..m_v {
            let c = g_r[(i, j)] * st.r[(i, j)];
            if c == 0.0 {
                continue;
            }
            for d in 0..de {
                let l = model.lengthscales[d];
                let diff = st.x[(i, d)] - model.z_hidden[(j, d)];
                g_z_hidden[(j, d)] += c * diff / (l * l);
                g_lengthscales[d] += c * diff * diff / (l * l * l);
            }
        }
    }
    let r_gram = st.r_chol.l() * st.r_chol.l().transpose();
    for j in 0..m_v {
        for k in 0..m_v {
            if j == k {
                continue;
            }
            // pre-jitter off-diagonal entries equal the factored ones
            let c = g_r_gram[(j, k)] * r_gram[(j, k)];
            if c == 0.0 {
                continue;
            }
            for d in 0..de {
                let l = model.lengthscales[d];
                let diff = model.z_hidden[(j, d)] - model.z_hidden[(k, d)];
                g_z_hidden[(j, d)] -= c * diff / (l * l);
                g_z_hidden[(k, d)] += c * diff / (l * l);
                g_lengthscales[d] += c * diff * diff / (l * l * l);
            }
        }
    }

    let grad = TdgpGrad {
        sigma_f_sq: g_sigma_f_sq,
        noise_sq: g_noise_sq,
        sigma_w_sq: g_sigma_w_sq,
        lengthscales: g_lengthscales,
        prior_mean_w: g_prior_mean,
        z_out: g_z_out,
        z_hidden: g_z_hidden,
        q_mu: g_q_mu,
        q_sigma_chol: g_q_l,
    };
    Ok((elbo, terms, grad))
}
