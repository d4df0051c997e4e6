use nalgebra::{DMatrix, DVector};

use super::{unit_se_cross, unit_se_gram, TdgpModel};
use crate::error::Result;
use crate::gp::{robust_cholesky, RobustCholesky};

/// Variational marginals of the hidden layer at a batch of inputs. For each
/// data row `i` and latent row `q` the entries `w_iqd` (d = 1..D) are
/// independent with means `mu[q][(i, d)]` and a shared conditional variance
/// `var[(i, q)]`, because the rows share one kernel and one variational
/// covariance across `d`.
#[derive(Debug, Clone)]
pub struct QwMarginals {
    /// Per latent row `q`: an `n x D` matrix of posterior means.
    pub mu: Vec<DMatrix<f64>>,
    /// `n x Q` shared per-(i, q) conditional variances (clamped at zero).
    pub var: DMatrix<f64>,
}

impl QwMarginals {
    /// Posterior mean of `w_iq.` as a `D`-vector.
    pub fn mean(&self, i: usize, q: usize) -> DVector<f64> {
        self.mu[q].row(i).transpose()
    }

    /// Posterior covariance of `w_iq.`: the shared scalar repeated on the
    /// diagonal.
    pub fn cov(&self, i: usize, q: usize) -> DMatrix<f64> {
        let d = self.mu[q].ncols();
        DMatrix::from_diagonal(&DVector::from_element(d, self.var[(i, q)]))
    }

    /// Posterior mean of the whole matrix `W(x_i)` (`Q x D`).
    pub fn mean_w(&self, i: usize) -> DMatrix<f64> {
        let q_dim = self.mu.len();
        let d = self.mu[0].ncols();
        DMatrix::from_fn(q_dim, d, |q, dd| self.mu[q][(i, dd)])
    }
}

/// Everything the bound and its gradients need about the hidden layer at a
/// batch: the sparse-conditional marginals plus the projected moments
/// `a_iq = mu_iq . x_i` and `s_iq = var_iq ||x_i||^2` of `h_q(x_i)`.
#[derive(Debug)]
pub(crate) struct HiddenState {
    /// Effective inputs (bias-augmented when the model asks for it), `n x D`.
    pub x: DMatrix<f64>,
    /// Cross kernel matrix `X -> Z_w` (unit variance), `n x m_v`.
    pub r: DMatrix<f64>,
    /// Gram on `Z_w` (unit variance, pre-jitter), factored under jitter.
    pub r_chol: RobustCholesky,
    /// `A = r (R + jitter I)^{-1}`, `n x m_v`.
    pub a_mat: DMatrix<f64>,
    /// Nystrom diagonal `d_i = sum_j A_ij r_ij`.
    pub nystrom: DVector<f64>,
    /// Squared row norms of the effective inputs.
    pub x_sqnorm: DVector<f64>,
    /// Raw (unclamped) conditional variances, `n x Q`.
    pub cond_var: DMatrix<f64>,
    /// Posterior means of the hidden entries, per `q` an `n x D` matrix.
    pub mu_tilde: Vec<DMatrix<f64>>,
    /// Projected means `a_iq`, `n x Q`.
    pub a: DMatrix<f64>,
    /// Projected variances `s_iq`, `n x Q`.
    pub s: DMatrix<f64>,
}

pub(crate) fn hidden_state(model: &TdgpModel, x_raw: &DMatrix<f64>) -> Result<HiddenState> {
    let x = model.prepare_inputs(x_raw)?;
    let n = x.nrows();
    let de = x.ncols();
    let q_dim = model.latent_dim;
    let m_v = model.num_inducing_hidden();

    let r = unit_se_cross(&x, &model.z_hidden, &model.lengthscales);
    let r_gram = unit_se_gram(&model.z_hidden, &model.lengthscales);
    let r_chol = robust_cholesky(&r_gram)?;
    // A^T = (R + jit)^{-1} r^T
    let a_mat = r_chol.solve_mat(&r.transpose()).transpose();
    let nystrom = DVector::from_fn(n, |i, _| {
        (0..m_v).map(|j| a_mat[(i, j)] * r[(i, j)]).sum::<f64>()
    });
    let x_sqnorm = DVector::from_fn(n, |i, _| x.row(i).norm_squared());

    let mut cond_var = DMatrix::zeros(n, q_dim);
    let mut mu_tilde = Vec::with_capacity(q_dim);
    let mut a = DMatrix::zeros(n, q_dim);
    let mut s = DMatrix::zeros(n, q_dim);
    for q in 0..q_dim {
        // t_iq = || (A L_q)_i ||^2
        let t = &a_mat * &model.q_sigma_chol[q];
        // centered variational means against the constant prior mean
        let mut centered = model.q_mu[q].clone();
        for d in 0..de {
            let m = model.prior_mean_w[(q, d)];
            for j in 0..m_v {
                centered[(j, d)] -= m;
            }
        }
        let mut mu_q = &a_mat * centered;
        for d in 0..de {
            let m = model.prior_mean_w[(q, d)];
            for i in 0..n {
                mu_q[(i, d)] += m;
            }
        }
        for i in 0..n {
            let tv = t.row(i).norm_squared();
            let cv = model.sigma_w_sq[q] * (1.0 - nystrom[i]) + tv;
            cond_var[(i, q)] = cv;
            a[(i, q)] = mu_q.row(i).dot(&x.row(i));
            s[(i, q)] = cv * x_sqnorm[i];
        }
        mu_tilde.push(mu_q);
    }

    Ok(HiddenState {
        x,
        r,
        r_chol,
        a_mat,
        nystrom,
        x_sqnorm,
        cond_var,
        mu_tilde,
        a,
        s,
    })
}

/// Variational marginals of the hidden entries at the rows of `x`:
/// for each `(i, q)` the sparse conditional of the row-`q` hidden GP under
/// `q(v_q.)`, with the conditional variance clamped at zero and shared across
/// the output index `d`.
pub fn qw_marginals(model: &TdgpModel, x: &DMatrix<f64>) -> Result<QwMarginals> {
    let st = hidden_state(model, x)?;
    Ok(QwMarginals {
        mu: st.mu_tilde,
        var: st.cond_var.map(|v| v.max(0.0)),
    })
}
