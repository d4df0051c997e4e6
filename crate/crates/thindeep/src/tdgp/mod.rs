//! The two-layer model: a GP output layer over latent images `h(x) = W(x) x`
//! whose entries `w_qd(.)` carry independent GP priors, inferred with a
//! collapsed variational bound over inducing values of `W` and closed-form
//! expected-kernel statistics.

mod bound;
mod elbo;
mod exports;
mod moments;
mod objective;
mod predict;
mod psi;
pub mod sgp;

pub use bound::optimal_qu;
pub use elbo::{collapsed_elbo, ElboTerms};
pub use exports::{
    export_field, export_latent, relevance_profile, PosteriorMeanW, RelevanceProfile,
};
pub use moments::{qw_marginals, QwMarginals};
pub use objective::TdgpObjective;
pub use predict::{Prediction, TdgpPosterior};
pub use psi::{psi1, psi2, psi_stats, PsiStats};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gp::{derive_stream, robust_cholesky};

/// All trainable state of the two-layer model.
///
/// Shapes (with `D` the raw input dim, `Q` the latent dim, augmented by one
/// when `bias_augmented` is set):
///
/// - `sigma_w_sq`: `Q` per-row hidden kernel variances
/// - `lengthscales`: `D` shared hidden ARD lengthscales
/// - `prior_mean_w`: `Q x D` constant hidden prior means
/// - `z_out`: `m_u x Q` output-layer pseudo-inputs (latent space)
/// - `z_hidden`: `m_v x D` hidden-layer pseudo-inputs (input space)
/// - `q_mu[q]`: `m_v x D` variational means of the inducing values, per row
/// - `q_sigma_chol[q]`: `m_v x m_v` lower factor of the per-row variational
///   covariance, shared across the `d` index by construction
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TdgpModel {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub sigma_f_sq: f64,
    pub noise_sq: f64,
    pub sigma_w_sq: DVector<f64>,
    pub lengthscales: DVector<f64>,
    pub prior_mean_w: DMatrix<f64>,
    pub z_out: DMatrix<f64>,
    pub z_hidden: DMatrix<f64>,
    pub q_mu: Vec<DMatrix<f64>>,
    pub q_sigma_chol: Vec<DMatrix<f64>>,
    pub bias_augmented: bool,
}

/// Initialization settings for [`TdgpModel::init`].
#[derive(Debug, Clone)]
pub struct TdgpInit {
    pub latent_dim: usize,
    pub num_inducing_out: usize,
    pub num_inducing_hidden: usize,
    pub bias_augmented: bool,
    pub seed: u64,
}

impl TdgpModel {
    /// Effective input dimension seen by the hidden layer.
    pub fn eff_input_dim(&self) -> usize {
        self.input_dim + usize::from(self.bias_augmented)
    }

    /// Append the constant bias coordinate when the model is augmented.
    pub fn prepare_inputs(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::shape(format!(
                "expected {} input columns, got {}",
                self.input_dim,
                x.ncols()
            )));
        }
        if !self.bias_augmented {
            return Ok(x.clone());
        }
        let mut out = DMatrix::from_element(x.nrows(), self.input_dim + 1, 1.0);
        out.view_mut((0, 0), (x.nrows(), x.ncols())).copy_from(x);
        Ok(out)
    }

    /// Data-dependent initialization: hidden prior means set to the identity
    /// block (so the initial model is close to a shallow unit-lengthscale
    /// GP), pseudo-inputs by k-means, variational factors at a softened
    /// prior.
    pub fn init(x_train: &DMatrix<f64>, cfg: &TdgpInit) -> Result<Self> {
        if cfg.latent_dim == 0 {
            return Err(Error::invalid("latent_dim must be at least 1"));
        }
        if cfg.num_inducing_out == 0 || cfg.num_inducing_hidden == 0 {
            return Err(Error::invalid("need at least one inducing point per layer"));
        }
        let input_dim = x_train.ncols();
        let de = input_dim + usize::from(cfg.bias_augmented);
        let qe = cfg.latent_dim + usize::from(cfg.bias_augmented);

        // Identity-block prior means, truncated to the latent rows; the bias
        // row (when present) is the last row of the identity.
        let mut prior_mean_w = DMatrix::zeros(qe, de);
        for q in 0..cfg.latent_dim.min(de) {
            prior_mean_w[(q, q)] = 1.0;
        }
        if cfg.bias_augmented {
            prior_mean_w[(qe - 1, de - 1)] = 1.0;
        }

        let model_stub = TdgpModel {
            input_dim,
            latent_dim: qe,
            sigma_f_sq: 1.0,
            noise_sq: 0.01,
            sigma_w_sq: DVector::from_element(qe, 1.0),
            lengthscales: DVector::from_element(de, 1.0),
            prior_mean_w,
            z_out: DMatrix::zeros(1, 1),
            z_hidden: DMatrix::zeros(1, 1),
            q_mu: vec![],
            q_sigma_chol: vec![],
            bias_augmented: cfg.bias_augmented,
        };
        let x_eff = model_stub.prepare_inputs(x_train)?;

        let z_hidden = kmeans(
            &x_eff,
            cfg.num_inducing_hidden,
            derive_stream(cfg.seed, 0xA1),
            25,
        );
        let images = &x_eff * model_stub.prior_mean_w.transpose();
        let z_out = kmeans(
            &images,
            cfg.num_inducing_out,
            derive_stream(cfg.seed, 0xA2),
            25,
        );

        // q(V) starts at the prior with a small mean jitter and a softened
        // prior covariance 0.1 * Kv.
        let m_v = z_hidden.nrows();
        let mut model = TdgpModel {
            z_out,
            z_hidden,
            ..model_stub
        };
        let r = unit_se_gram(&model.z_hidden, &model.lengthscales);
        let r_chol = robust_cholesky(&r)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_stream(cfg.seed, 0xA3));
        for q in 0..qe {
            let mut mu = DMatrix::zeros(m_v, de);
            for d in 0..de {
                for j in 0..m_v {
                    mu[(j, d)] =
                        model.prior_mean_w[(q, d)] + 0.1 * rng.sample::<f64, _>(StandardNormal);
                }
            }
            model.q_mu.push(mu);
            // chol(0.1 * sigma_w^2 * R) = sqrt(0.1 * sigma_w^2) * chol(R)
            let scale = (0.1 * model.sigma_w_sq[q]).sqrt();
            model.q_sigma_chol.push(r_chol.l() * scale);
        }
        model.validate()?;
        Ok(model)
    }

    pub fn num_inducing_out(&self) -> usize {
        self.z_out.nrows()
    }

    pub fn num_inducing_hidden(&self) -> usize {
        self.z_hidden.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let de = self.eff_input_dim();
        let q = self.latent_dim;
        if !(self.sigma_f_sq > 0.0) || !(self.noise_sq > 0.0) {
            return Err(Error::invalid("variances must be positive"));
        }
        if self.sigma_w_sq.len() != q || self.sigma_w_sq.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid(
                "need one positive hidden kernel variance per latent row",
            ));
        }
        if self.lengthscales.len() != de || self.lengthscales.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("need one positive lengthscale per input dim"));
        }
        if self.prior_mean_w.nrows() != q || self.prior_mean_w.ncols() != de {
            return Err(Error::shape("prior_mean_w must be Q x D"));
        }
        if self.z_out.ncols() != q {
            return Err(Error::shape("z_out must have latent_dim columns"));
        }
        if self.z_hidden.ncols() != de {
            return Err(Error::shape("z_hidden must have input-dim columns"));
        }
        let m_v = self.z_hidden.nrows();
        if self.q_mu.len() != q || self.q_sigma_chol.len() != q {
            return Err(Error::shape("need one variational factor per latent row"));
        }
        for (mu, l) in self.q_mu.iter().zip(self.q_sigma_chol.iter()) {
            if mu.nrows() != m_v || mu.ncols() != de {
                return Err(Error::shape("q_mu blocks must be m_v x D"));
            }
            if l.nrows() != m_v || l.ncols() != m_v {
                return Err(Error::shape("q_sigma_chol blocks must be m_v x m_v"));
            }
            if (0..m_v).any(|i| !(l[(i, i)] > 0.0)) {
                return Err(Error::invalid(
                    "q_sigma_chol diagonals must be positive (PD factor)",
                ));
            }
        }
        Ok(())
    }
}

/// Unit-variance ARD-SE gram matrix between the rows of two point sets.
pub(crate) fn unit_se_cross(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    lengthscales: &DVector<f64>,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), b.nrows());
    for i in 0..a.nrows() {
        for j in 0..b.nrows() {
            let mut acc = 0.0;
            for d in 0..a.ncols() {
                let diff = (a[(i, d)] - b[(j, d)]) / lengthscales[d];
                acc += diff * diff;
            }
            out[(i, j)] = (-0.5 * acc).exp();
        }
    }
    out
}

/// Unit-variance ARD-SE gram matrix on one point set (symmetric, unit diag).
pub(crate) fn unit_se_gram(points: &DMatrix<f64>, lengthscales: &DVector<f64>) -> DMatrix<f64> {
    let n = points.nrows();
    let mut out = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..i {
            let mut acc = 0.0;
            for d in 0..points.ncols() {
                let diff = (points[(i, d)] - points[(j, d)]) / lengthscales[d];
                acc += diff * diff;
            }
            let v = (-0.5 * acc).exp();
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Plain Lloyd's k-means with a seeded start; returns the `k` centers. When
/// `k >= n` the points themselves are returned (cycled with a small seeded
/// jitter if `k > n`).
pub(crate) fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64, iters: usize) -> DMatrix<f64> {
    let n = points.nrows();
    let d = points.ncols();
    if k >= n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return DMatrix::from_fn(k, d, |i, j| {
            let base = points[(i % n, j)];
            if i < n {
                base
            } else {
                base + 1e-3 * rng.sample::<f64, _>(StandardNormal)
            }
        });
    }
    let perm = crate::data::seeded_permutation(n, seed);
    let mut centers = DMatrix::from_fn(k, d, |i, j| points[(perm[i], j)]);
    let mut assign = vec![0usize; n];
    for _ in 0..iters {
        let mut changed = false;
        for i in 0..n {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let mut acc = 0.0;
                for j in 0..d {
                    let diff = points[(i, j)] - centers[(c, j)];
                    acc += diff * diff;
                }
                if acc < best_d {
                    best_d = acc;
                    best = c;
                }
            }
            if assign[i] != best {
                changed = true;
                assign[i] = best;
            }
        }
        let mut sums = DMatrix::<f64>::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assign[i]] += 1;
            for j in 0..d {
                sums[(assign[i], j)] += points[(i, j)];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    centers[(c, j)] = sums[(c, j)] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    centers
}
