use nalgebra::DMatrix;

use super::moments::{hidden_state, QwMarginals};
use super::TdgpModel;
use crate::error::{Error, Result};

/// The expected-kernel statistics of a batch under the variational hidden
/// layer: `psi0 = E[tr K_f]`, `Psi1 = E[K_fu]`, `Psi2 = E[K_fu^T K_fu]`.
///
/// Conventions: the inducing outputs are those of the unit-variance output
/// process, so `K_u` has unit diagonal, `Psi1` scales with `sigma_f`, and
/// `Psi2` with `sigma_f^2`. The bound and predictions are invariant to this
/// scaling choice.
#[derive(Debug, Clone)]
pub struct PsiStats {
    pub psi0: f64,
    pub psi1: DMatrix<f64>,
    pub psi2: DMatrix<f64>,
}

/// `Psi1[i, j] = sigma_f prod_q (s_iq + 1)^{-1/2}
///               exp[-0.5 (a_iq - z_jq)^2 / (s_iq + 1)]`
pub(crate) fn psi1_from_moments(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    z_out: &DMatrix<f64>,
    sigma_f: f64,
) -> DMatrix<f64> {
    let (n, q_dim) = a.shape();
    let m = z_out.nrows();
    let mut ln_t = DMatrix::zeros(n, q_dim);
    let mut inv_t = DMatrix::zeros(n, q_dim);
    for i in 0..n {
        for q in 0..q_dim {
            let t = s[(i, q)] + 1.0;
            ln_t[(i, q)] = t.ln();
            inv_t[(i, q)] = 1.0 / t;
        }
    }
    let mut out = DMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let mut log_acc = 0.0;
            for q in 0..q_dim {
                let u = a[(i, q)] - z_out[(j, q)];
                log_acc += -0.5 * u * u * inv_t[(i, q)] - 0.5 * ln_t[(i, q)];
            }
            out[(i, j)] = sigma_f * log_acc.exp();
        }
    }
    out
}

/// `Psi2[j, k] = sigma_f^2 exp[-1/4 sum_q (z_jq - z_kq)^2]
///               * sum_i prod_q (2 s_iq + 1)^{-1/2}
///                 exp[-(a_iq - zbar_q)^2 / (2 s_iq + 1)]`
/// with `zbar = (z_j + z_k) / 2`. Symmetric PSD by construction.
pub(crate) fn psi2_from_moments(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    z_out: &DMatrix<f64>,
    sigma_f_sq: f64,
) -> DMatrix<f64> {
    let (n, q_dim) = a.shape();
    let m = z_out.nrows();
    let mut inv_c = DMatrix::zeros(n, q_dim);
    let mut w = vec![0.0; n]; // prod_q (2 s + 1)^{-1/2}
    for i in 0..n {
        let mut ln_acc = 0.0;
        for q in 0..q_dim {
            let c = 2.0 * s[(i, q)] + 1.0;
            inv_c[(i, q)] = 1.0 / c;
            ln_acc += c.ln();
        }
        w[i] = (-0.5 * ln_acc).exp();
    }
    let mut out = DMatrix::zeros(m, m);
    let mut zbar = vec![0.0; q_dim];
    for j in 0..m {
        for k in 0..=j {
            let mut zdist = 0.0;
            for q in 0..q_dim {
                let dz = z_out[(j, q)] - z_out[(k, q)];
                zdist += dz * dz;
                zbar[q] = 0.5 * (z_out[(j, q)] + z_out[(k, q)]);
            }
            let pre = sigma_f_sq * (-0.25 * zdist).exp();
            let mut acc = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for q in 0..q_dim {
                    let u = a[(i, q)] - zbar[q];
                    e -= u * u * inv_c[(i, q)];
                }
                acc += w[i] * e.exp();
            }
            let v = pre * acc;
            out[(j, k)] = v;
            out[(k, j)] = v;
        }
    }
    out
}

/// Adjoints of [`psi1_from_moments`] given the upstream gradient `g`.
/// Returns `(g_a, g_s, g_z_out, g_sigma_f)`.
pub(crate) fn psi1_adjoint(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    z_out: &DMatrix<f64>,
    sigma_f: f64,
    psi1: &DMatrix<f64>,
    g: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64) {
    let (n, q_dim) = a.shape();
    let m = z_out.nrows();
    let mut g_a = DMatrix::zeros(n, q_dim);
    let mut g_s = DMatrix::zeros(n, q_dim);
    let mut g_z = DMatrix::zeros(m, q_dim);
    let mut g_sigma_f = 0.0;
    for i in 0..n {
        for j in 0..m {
            let base = g[(i, j)] * psi1[(i, j)];
            if base == 0.0 {
                continue;
            }
            g_sigma_f += base / sigma_f;
            for q in 0..q_dim {
                let t = s[(i, q)] + 1.0;
                let u = a[(i, q)] - z_out[(j, q)];
                let du = -u / t;
                g_a[(i, q)] += base * du;
                g_z[(j, q)] -= base * du;
                g_s[(i, q)] += base * (-0.5 / t + 0.5 * u * u / (t * t));
            }
        }
    }
    (g_a, g_s, g_z, g_sigma_f)
}

/// Adjoints of [`psi2_from_moments`]. Returns `(g_a, g_s, g_z_out,
/// g_sigma_f_sq)`.
pub(crate) fn psi2_adjoint(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    z_out: &DMatrix<f64>,
    sigma_f_sq: f64,
    g: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64) {
    let (n, q_dim) = a.shape();
    let m = z_out.nrows();
    let mut inv_c = DMatrix::zeros(n, q_dim);
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut ln_acc = 0.0;
        for q in 0..q_dim {
            let c = 2.0 * s[(i, q)] + 1.0;
            inv_c[(i, q)] = 1.0 / c;
            ln_acc += c.ln();
        }
        w[i] = (-0.5 * ln_acc).exp();
    }
    let mut g_a = DMatrix::zeros(n, q_dim);
    let mut g_s = DMatrix::zeros(n, q_dim);
    let mut g_z = DMatrix::zeros(m, q_dim);
    let mut g_sigma_f_sq = 0.0;
    let mut zbar = vec![0.0; q_dim];
    let mut g_i = vec![0.0; n];
    for j in 0..m {
        for k in 0..=j {
            // Upstream weight for the unordered pair: both (j,k) and (k,j)
            // hold the same value, so their adjoints sum.
            let weight = if j == k {
                g[(j, j)]
            } else {
                g[(j, k)] + g[(k, j)]
            };
            if weight == 0.0 {
                continue;
            }
            let mut zdist = 0.0;
            for q in 0..q_dim {
                let dz = z_out[(j, q)] - z_out[(k, q)];
                zdist += dz * dz;
                zbar[q] = 0.5 * (z_out[(j, q)] + z_out[(k, q)]);
            }
            let pre = (-0.25 * zdist).exp();
            let mut acc = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for q in 0..q_dim {
                    let u = a[(i, q)] - zbar[q];
                    e -= u * u * inv_c[(i, q)];
                }
                g_i[i] = w[i] * e.exp();
                acc += g_i[i];
            }
            g_sigma_f_sq += weight * pre * acc;
            let scale = weight * sigma_f_sq * pre;
            for q in 0..q_dim {
                let dz = z_out[(j, q)] - z_out[(k, q)];
                // distance pre-factor: d(-zdist/4)/dz_j = -dz/2
                g_z[(j, q)] += scale * acc * (-0.5 * dz);
                g_z[(k, q)] += scale * acc * (0.5 * dz);
            }
            for i in 0..n {
                if g_i[i] == 0.0 {
                    continue;
                }
                let gi = scale * g_i[i];
                for q in 0..q_dim {
                    let u = a[(i, q)] - zbar[q];
                    let ic = inv_c[(i, q)];
                    g_a[(i, q)] += gi * (-2.0 * u * ic);
                    // zbar enters with d zbar / d z_j = d zbar / d z_k = 1/2
                    let gzb = gi * (2.0 * u * ic) * 0.5;
                    g_z[(j, q)] += gzb;
                    g_z[(k, q)] += gzb;
                    g_s[(i, q)] += gi * (-ic + 2.0 * u * u * ic * ic);
                }
            }
        }
    }
    (g_a, g_s, g_z, g_sigma_f_sq)
}

/// `Psi1 = E[K_fu]` for a batch, using precomputed marginals.
pub fn psi1(model: &TdgpModel, x: &DMatrix<f64>, marg: &QwMarginals) -> Result<DMatrix<f64>> {
    let (a, s) = projected_moments(model, x, marg)?;
    Ok(psi1_from_moments(
        &a,
        &s,
        &model.z_out,
        model.sigma_f_sq.sqrt(),
    ))
}

/// `Psi2 = E[K_fu^T K_fu]` for a batch, using precomputed marginals.
pub fn psi2(model: &TdgpModel, x: &DMatrix<f64>, marg: &QwMarginals) -> Result<DMatrix<f64>> {
    let (a, s) = projected_moments(model, x, marg)?;
    Ok(psi2_from_moments(&a, &s, &model.z_out, model.sigma_f_sq))
}

/// All three statistics from fresh marginals.
pub fn psi_stats(model: &TdgpModel, x: &DMatrix<f64>) -> Result<PsiStats> {
    let st = hidden_state(model, x)?;
    let sigma_f = model.sigma_f_sq.sqrt();
    Ok(PsiStats {
        psi0: x.nrows() as f64 * model.sigma_f_sq,
        psi1: psi1_from_moments(&st.a, &st.s, &model.z_out, sigma_f),
        psi2: psi2_from_moments(&st.a, &st.s, &model.z_out, model.sigma_f_sq),
    })
}

/// Projected per-(i, q) moments of `h_q(x_i)` from marginals supplied by the
/// caller (mean `mu_iq . x_i`, variance `var_iq ||x_i||^2`).
fn projected_moments(
    model: &TdgpModel,
    x_raw: &DMatrix<f64>,
    marg: &QwMarginals,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let x = model.prepare_inputs(x_raw)?;
    let n = x.nrows();
    let q_dim = model.latent_dim;
    if marg.mu.len() != q_dim || marg.var.nrows() != n {
        return Err(Error::shape("marginals do not match the batch"));
    }
    let mut a = DMatrix::zeros(n, q_dim);
    let mut s = DMatrix::zeros(n, q_dim);
    for i in 0..n {
        let xs = x.row(i).norm_squared();
        for q in 0..q_dim {
            a[(i, q)] = marg.mu[q].row(i).dot(&x.row(i));
            s[(i, q)] = marg.var[(i, q)] * xs;
        }
    }
    Ok((a, s))
}
