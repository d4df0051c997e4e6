//! Shallow sparse-GP baseline: an ARD-SE kernel with deterministic features,
//! trained through the same collapsed bound. In scaled coordinates
//! `phi(x) = x / l` the ARD kernel is the unit SE kernel, so the expected
//! statistics reduce to plain kernel matrices (`s = 0`) and the whole bound
//! and prediction machinery is shared with the two-layer model.

use nalgebra::{DMatrix, DVector};

use super::bound::{collapsed_bound_adjoints, collapsed_bound_core};
use super::predict::{Prediction, SparsePosteriorCore};
use super::psi::{psi1_adjoint, psi1_from_moments, psi2_adjoint, psi2_from_moments, PsiStats};
use super::{kmeans, unit_se_gram, ElboTerms};
use crate::error::{Error, Result};
use crate::gp::{derive_stream, VARIANCE_FLOOR};
use crate::train::{softplus, softplus_grad, softplus_inv, Objective, ObjectiveEval, ParamVector};

/// Trainable state of the shallow baseline. Pseudo-inputs live in the scaled
/// coordinates `x / l`, which keeps them unconstrained.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SgpModel {
    pub input_dim: usize,
    pub sigma_f_sq: f64,
    pub noise_sq: f64,
    pub lengthscales: DVector<f64>,
    pub z_scaled: DMatrix<f64>,
}

impl SgpModel {
    /// Unit hyperparameters, pseudo-inputs by k-means on the inputs.
    pub fn init(x_train: &DMatrix<f64>, num_inducing: usize, seed: u64) -> Result<Self> {
        if num_inducing == 0 {
            return Err(Error::invalid("need at least one inducing point"));
        }
        let z = kmeans(x_train, num_inducing, derive_stream(seed, 0xB1), 25);
        Ok(SgpModel {
            input_dim: x_train.ncols(),
            sigma_f_sq: 1.0,
            noise_sq: 0.01,
            lengthscales: DVector::from_element(x_train.ncols(), 1.0),
            z_scaled: z,
        })
    }

    pub fn num_inducing(&self) -> usize {
        self.z_scaled.nrows()
    }

    /// Scaled features `x / l` (the deterministic analogue of the projected
    /// moments; variances are identically zero).
    fn features(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::shape(format!(
                "expected {} input columns, got {}",
                self.input_dim,
                x.ncols()
            )));
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            x[(i, j)] / self.lengthscales[j]
        }))
    }

    fn psi(&self, x: &DMatrix<f64>) -> Result<(PsiStats, DMatrix<f64>, DMatrix<f64>)> {
        let a = self.features(x)?;
        let s = DMatrix::zeros(a.nrows(), a.ncols());
        let sigma_f = self.sigma_f_sq.sqrt();
        let psi = PsiStats {
            psi0: x.nrows() as f64 * self.sigma_f_sq,
            psi1: psi1_from_moments(&a, &s, &self.z_scaled, sigma_f),
            psi2: psi2_from_moments(&a, &s, &self.z_scaled, self.sigma_f_sq),
        };
        Ok((psi, a, s))
    }

    /// The collapsed bound (no hidden layer, so no hidden KL).
    pub fn collapsed_elbo(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(f64, ElboTerms)> {
        let (psi, _, _) = self.psi(x)?;
        let ku_raw = unit_se_gram(&self.z_scaled, &DVector::from_element(self.input_dim, 1.0));
        let bs = collapsed_bound_core(&ku_raw, &psi, self.noise_sq, y)?;
        Ok((
            bs.value,
            ElboTerms {
                elbo: bs.value,
                blue_box: bs.value,
                kl_hidden: 0.0,
                psi0: psi.psi0,
                trace_residual: psi.psi0 - bs.tr_kinv_psi2,
                quad: bs.quad,
                lndet_sigma: bs.lndet_sigma,
                lndet_ku: bs.lndet_ku,
                jitter_ku: bs.jitter_ku,
                jitter_r: 0.0,
                jitter_sigma: bs.jitter_sigma,
            },
        ))
    }

    pub fn pack(&self) -> ParamVector {
        let mut pv = ParamVector::new();
        pv.push_group("sigma_f_sq", &[softplus_inv(self.sigma_f_sq)]);
        pv.push_group("noise_sq", &[softplus_inv(self.noise_sq)]);
        let ls: Vec<f64> = self.lengthscales.iter().map(|&v| softplus_inv(v)).collect();
        pv.push_group("lengthscales", &ls);
        pv.push_group("z_out", &super::objective::row_major(&self.z_scaled));
        pv
    }

    pub fn unpack(&self, values: &[f64]) -> SgpModel {
        let d = self.input_dim;
        let m = self.num_inducing();
        let sigma_f_sq = softplus(values[0]);
        let noise_sq = softplus(values[1]);
        let lengthscales = DVector::from_fn(d, |j, _| softplus(values[2 + j]));
        let z_scaled = super::objective::from_row_major(&values[2 + d..2 + d + m * d], m, d);
        SgpModel {
            input_dim: d,
            sigma_f_sq,
            noise_sq,
            lengthscales,
            z_scaled,
        }
    }

    /// Relevance of each input dimension: the inverse lengthscale, normalized
    /// to a maximum of one.
    pub fn relevance(&self) -> DVector<f64> {
        let inv = self.lengthscales.map(|l| 1.0 / l);
        let max = inv.max();
        if max > 0.0 {
            inv / max
        } else {
            inv
        }
    }
}

/// Negative-free ELBO objective for the shallow baseline.
pub struct SgpObjective<'a> {
    pub template: &'a SgpModel,
    pub x: &'a DMatrix<f64>,
    pub y: &'a DVector<f64>,
}

impl<'a> Objective for SgpObjective<'a> {
    fn eval(&self, params: &ParamVector) -> Result<ObjectiveEval> {
        let model = self.template.unpack(params.values());
        let (psi, a, s) = model.psi(self.x)?;
        let ku_raw = unit_se_gram(&model.z_scaled, &DVector::from_element(model.input_dim, 1.0));
        let bs = collapsed_bound_core(&ku_raw, &psi, model.noise_sq, self.y)?;
        let adj = collapsed_bound_adjoints(&bs, &psi, model.noise_sq, self.y);
        let sigma_f = model.sigma_f_sq.sqrt();
        let (ga1, _gs1, gz1, g_sigma_f) =
            psi1_adjoint(&a, &s, &model.z_scaled, sigma_f, &psi.psi1, &adj.g_psi1);
        let (ga2, _gs2, gz2, g_sf2) =
            psi2_adjoint(&a, &s, &model.z_scaled, model.sigma_f_sq, &adj.g_psi2);
        let ga = ga1 + ga2;
        let mut g_z = gz1 + gz2;
        let m = model.num_inducing();
        for j in 0..m {
            for k in 0..m {
                if j == k {
                    continue;
                }
                let c = adj.g_ku[(j, k)] * bs.ku[(j, k)];
                if c == 0.0 {
                    continue;
                }
                for q in 0..model.input_dim {
                    let diff = model.z_scaled[(j, q)] - model.z_scaled[(k, q)];
                    g_z[(j, q)] -= c * diff;
                    g_z[(k, q)] += c * diff;
                }
            }
        }
        let g_sigma_f_sq =
            g_sigma_f / (2.0 * sigma_f) + g_sf2 + self.x.nrows() as f64 * adj.g_psi0;
        // a_ij = x_ij / l_j
        let mut g_ls = DVector::zeros(model.input_dim);
        for j in 0..model.input_dim {
            let l = model.lengthscales[j];
            let mut acc = 0.0;
            for i in 0..self.x.nrows() {
                acc += ga[(i, j)] * (-self.x[(i, j)] / (l * l));
            }
            g_ls[j] = acc;
        }

        let u = params.values();
        let mut g = Vec::with_capacity(u.len());
        g.push(g_sigma_f_sq * softplus_grad(u[0]));
        g.push(adj.g_noise_sq * softplus_grad(u[1]));
        for j in 0..model.input_dim {
            g.push(g_ls[j] * softplus_grad(u[2 + j]));
        }
        g.extend(super::objective::row_major(&g_z));

        Ok(ObjectiveEval {
            value: bs.value,
            grad: g,
            terms: vec![
                ("blue_box", bs.value),
                ("kl_hidden", 0.0),
                ("noise_sq", model.noise_sq),
                ("sigma_f_sq", model.sigma_f_sq),
            ],
        })
    }
}

/// Trained shallow posterior.
#[derive(Debug, Clone)]
pub struct SgpPosterior {
    pub model: SgpModel,
    core: SparsePosteriorCore,
}

impl SgpPosterior {
    pub fn new(model: SgpModel, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        let (psi, _, _) = model.psi(x)?;
        let ku_raw = unit_se_gram(&model.z_scaled, &DVector::from_element(model.input_dim, 1.0));
        let core = SparsePosteriorCore::new(&ku_raw, model.sigma_f_sq, model.noise_sq, &psi, y)?;
        Ok(SgpPosterior { model, core })
    }

    pub fn predict(&self, x_star: &DMatrix<f64>) -> Result<(Vec<Prediction>, usize)> {
        let a = self.model.features(x_star)?;
        let sigma_f = self.model.sigma_f_sq.sqrt();
        let mut out = Vec::with_capacity(x_star.nrows());
        let mut clamps = 0usize;
        for i in 0..x_star.nrows() {
            let a_i = DMatrix::from_fn(1, self.model.input_dim, |_, j| a[(i, j)]);
            let s_i = DMatrix::zeros(1, self.model.input_dim);
            let psi1_pt = psi1_from_moments(&a_i, &s_i, &self.model.z_scaled, sigma_f)
                .row(0)
                .transpose();
            let psi2_pt =
                psi2_from_moments(&a_i, &s_i, &self.model.z_scaled, self.model.sigma_f_sq);
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
