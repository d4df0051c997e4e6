use nalgebra::{DMatrix, DVector};

use super::elbo::collapsed_elbo_grad;
use super::TdgpModel;
use crate::error::Result;
use crate::train::{softplus, softplus_grad, softplus_inv, Objective, ObjectiveEval, ParamVector};

/// The ELBO of a [`TdgpModel`] as a differentiable objective over the
/// unconstrained parameter vector. Positive quantities travel through
/// softplus; pseudo-inputs, prior means, and variational means are
/// unconstrained; the variational factors are lower triangular with softplus
/// diagonals.
pub struct TdgpObjective<'a> {
    pub template: &'a TdgpModel,
    pub x: &'a DMatrix<f64>,
    pub y: &'a DVector<f64>,
}

impl TdgpModel {
    /// Flatten into an unconstrained [`ParamVector`].
    pub fn pack(&self) -> ParamVector {
        let mut pv = ParamVector::new();
        pv.push_group("sigma_f_sq", &[softplus_inv(self.sigma_f_sq)]);
        pv.push_group("noise_sq", &[softplus_inv(self.noise_sq)]);
        let sw: Vec<f64> = self.sigma_w_sq.iter().map(|&v| softplus_inv(v)).collect();
        pv.push_group("sigma_w_sq", &sw);
        let ls: Vec<f64> = self.lengthscales.iter().map(|&v| softplus_inv(v)).collect();
        pv.push_group("lengthscales", &ls);
        pv.push_group("prior_mean_w", &row_major(&self.prior_mean_w));
        pv.push_group("z_out", &row_major(&self.z_out));
        pv.push_group("z_hidden", &row_major(&self.z_hidden));
        let mut q_mu = Vec::new();
        for m in &self.q_mu {
            q_mu.extend(row_major(m));
        }
        pv.push_group("q_mu", &q_mu);
        let mut q_l = Vec::new();
        for l in &self.q_sigma_chol {
            for i in 0..l.nrows() {
                for j in 0..=i {
                    if i == j {
                        q_l.push(softplus_inv(l[(i, j)]));
                    } else {
                        q_l.push(l[(i, j)]);
                    }
                }
            }
        }
        pv.push_group("q_sigma_chol", &q_l);
        pv
    }

    /// Rebuild a model from unconstrained values, using `self` for shapes and
    /// flags.
    pub fn unpack(&self, values: &[f64]) -> TdgpModel {
        let q_dim = self.latent_dim;
        let de = self.eff_input_dim();
        let m_u = self.num_inducing_out();
        let m_v = self.num_inducing_hidden();
        let mut it = values.iter().copied();
        let mut take = |k: usize| -> Vec<f64> { (&mut it).take(k).collect() };

        let sigma_f_sq = softplus(take(1)[0]);
        let noise_sq = softplus(take(1)[0]);
        let sigma_w_sq = DVector::from_vec(take(q_dim)).map(softplus);
        let lengthscales = DVector::from_vec(take(de)).map(softplus);
        let prior_mean_w = from_row_major(&take(q_dim * de), q_dim, de);
        let z_out = from_row_major(&take(m_u * q_dim), m_u, q_dim);
        let z_hidden = from_row_major(&take(m_v * de), m_v, de);
        let mut q_mu = Vec::with_capacity(q_dim);
        for _ in 0..q_dim {
            q_mu.push(from_row_major(&take(m_v * de), m_v, de));
        }
        let mut q_sigma_chol = Vec::with_capacity(q_dim);
        for _ in 0..q_dim {
            let mut l = DMatrix::zeros(m_v, m_v);
            for i in 0..m_v {
                for j in 0..=i {
                    let v = take(1)[0];
                    l[(i, j)] = if i == j { softplus(v) } else { v };
                }
            }
            q_sigma_chol.push(l);
        }
        debug_assert!(it.next().is_none(), "parameter vector length mismatch");
        TdgpModel {
            input_dim: self.input_dim,
            latent_dim: q_dim,
            sigma_f_sq,
            noise_sq,
            sigma_w_sq,
            lengthscales,
            prior_mean_w,
            z_out,
            z_hidden,
            q_mu,
            q_sigma_chol,
            bias_augmented: self.bias_augmented,
        }
    }
}

impl<'a> Objective for TdgpObjective<'a> {
    fn eval(&self, params: &ParamVector) -> Result<ObjectiveEval> {
        let model = self.template.unpack(params.values());
        let (elbo, terms, grad) = collapsed_elbo_grad(&model, self.x, self.y)?;

        // Chain constrained gradients back through the transforms, in the
        // exact order used by `pack`.
        let u = params.values();
        let mut g = Vec::with_capacity(u.len());
        let mut pos = 0usize;
        let push_softplus = |g_out: &mut Vec<f64>, pos: &mut usize, gc: f64| {
            g_out.push(gc * softplus_grad(u[*pos]));
            *pos += 1;
        };
        let push_id = |g_out: &mut Vec<f64>, pos: &mut usize, gc: f64| {
            g_out.push(gc);
            *pos += 1;
        };
        push_softplus(&mut g, &mut pos, grad.sigma_f_sq);
        push_softplus(&mut g, &mut pos, grad.noise_sq);
        for q in 0..model.latent_dim {
            push_softplus(&mut g, &mut pos, grad.sigma_w_sq[q]);
        }
        for d in 0..model.eff_input_dim() {
            push_softplus(&mut g, &mut pos, grad.lengthscales[d]);
        }
        for v in row_major(&grad.prior_mean_w) {
            push_id(&mut g, &mut pos, v);
        }
        for v in row_major(&grad.z_out) {
            push_id(&mut g, &mut pos, v);
        }
        for v in row_major(&grad.z_hidden) {
            push_id(&mut g, &mut pos, v);
        }
        for gm in &grad.q_mu {
            for v in row_major(gm) {
                push_id(&mut g, &mut pos, v);
            }
        }
        for gl in &grad.q_sigma_chol {
            for i in 0..gl.nrows() {
                for j in 0..=i {
                    if i == j {
                        push_softplus(&mut g, &mut pos, gl[(i, j)]);
                    } else {
                        push_id(&mut g, &mut pos, gl[(i, j)]);
                    }
                }
            }
        }
        debug_assert_eq!(pos, u.len());

        Ok(ObjectiveEval {
            value: elbo,
            grad: g,
            terms: vec![
                ("blue_box", terms.blue_box),
                ("kl_hidden", terms.kl_hidden),
                ("noise_sq", model.noise_sq),
                ("sigma_f_sq", model.sigma_f_sq),
            ],
        })
    }
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub(crate) fn from_row_major(v: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| v[i * cols + j])
}
