//! Depth-`L` prior samplers on evaluation grids for the compositional and
//! locally-linear hierarchies, the augmented (affine) layer construction, and
//! covariance saturation statistics.

mod stats;

pub use stats::{flatness_fractions, saturation_stats, FlatnessSummary, SaturationStat};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::{derive_stream, robust_cholesky, sample_gp, standard_normal_vector};

/// Grids above this size would make exact joint draws too expensive.
pub const MAX_GRID: usize = 512;

/// Which hierarchy to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ModelKind {
    /// Function composition: `h_l = f_l(h_{l-1})`.
    Cdgp,
    /// Locally linear deformation: `h_l = W_l(h_{l-1}) x`.
    Tdgp,
    /// Deformation on the bias-augmented input: `h_l = W_l(h~_{l-1}) x + d_l(h~_{l-1})`,
    /// carried in augmented coordinates with a trailing constant one.
    TdgpAugmented,
}

/// Prior mean of the layer processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MeanMode {
    Zero,
    /// Identity skip: the mean of layer output `q` is coordinate `q` of its
    /// input (CDGP) or the identity block rows (deformation models).
    LinearIdentity,
}

/// Kernel of one layer: isotropic SE over the previous representation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LayerParams {
    pub variance: f64,
    pub lengthscale: f64,
    /// Kernel variance of the multiplicative `W` block in augmented layers
    /// (defaults to `variance`). Zero collapses the block onto its zero mean,
    /// leaving the purely compositional `d` part.
    pub w_variance: Option<f64>,
}

impl Default for LayerParams {
    fn default() -> Self {
        LayerParams {
            variance: 1.0,
            lengthscale: 1.0,
            w_variance: None,
        }
    }
}

/// Depth, widths, per-layer kernels, mean mode, and hierarchy kind.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DepthConfig {
    /// Number of GP layers including the scalar output layer; `1` is a
    /// shallow GP.
    pub depth: usize,
    /// Widths of the hidden representations `h^1 .. h^{L-1}` (ignored for
    /// depth 1). For the deformation kinds these are the row counts of `W`.
    pub widths: Vec<usize>,
    /// One kernel per layer, `layers[l]` for layer `l+1`.
    pub layers: Vec<LayerParams>,
    pub mean_mode: MeanMode,
    pub kind: ModelKind,
}

impl DepthConfig {
    /// Uniform configuration: all hidden widths `width`, all kernels unit.
    pub fn uniform(kind: ModelKind, depth: usize, width: usize, mean_mode: MeanMode) -> Self {
        DepthConfig {
            depth,
            widths: vec![width; depth.saturating_sub(1)],
            layers: vec![LayerParams::default(); depth],
            mean_mode,
            kind,
        }
    }

    pub fn validate(&self, grid_dim: usize) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::invalid("depth must be at least 1"));
        }
        if self.widths.len() + 1 != self.depth {
            return Err(Error::invalid(format!(
                "need {} hidden widths for depth {}, got {}",
                self.depth - 1,
                self.depth,
                self.widths.len()
            )));
        }
        if self.layers.len() != self.depth {
            return Err(Error::invalid(format!(
                "need {} layer kernels for depth {}, got {}",
                self.depth,
                self.depth,
                self.layers.len()
            )));
        }
        if self.widths.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if self
            .layers
            .iter()
            .any(|l| l.variance < 0.0 || !(l.lengthscale > 0.0) || l.w_variance.is_some_and(|v| v < 0.0))
        {
            return Err(Error::invalid(
                "layer variances must be non-negative and lengthscales positive",
            ));
        }
        if self.mean_mode == MeanMode::LinearIdentity && self.kind == ModelKind::Cdgp {
            for (i, &w) in self.widths.iter().enumerate() {
                let prev = if i == 0 { grid_dim } else { self.widths[i - 1] };
                if w != prev {
                    return Err(Error::invalid(
                        "identity mean needs matching widths between layers",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Depth-indexed function samples and covariance matrices on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSampleGrid {
    pub grid: DMatrix<f64>,
    /// Representations `h^0 .. h^{L-1}` (`h^0` is the grid itself; augmented
    /// kinds carry the trailing constant coordinate).
    pub layers: Vec<DMatrix<f64>>,
    /// Final function sample on the grid.
    pub f: DVector<f64>,
    /// Kernel matrix each layer draws from, evaluated on its input
    /// representation (`layer_covs[l]` feeds layer `l+1`).
    pub layer_covs: Vec<DMatrix<f64>>,
}

fn se_gram_on(points: &DMatrix<f64>, params: &LayerParams) -> DMatrix<f64> {
    let n = points.nrows();
    let mut out = DMatrix::from_element(n, n, params.variance);
    let inv_l2 = 1.0 / (params.lengthscale * params.lengthscale);
    for i in 0..n {
        for j in 0..i {
            let mut acc = 0.0;
            for d in 0..points.ncols() {
                let diff = points[(i, d)] - points[(j, d)];
                acc += diff * diff;
            }
            let v = params.variance * (-0.5 * acc * inv_l2).exp();
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Joint draw of one GP column on the rows of `points`. A zero kernel
/// variance short-circuits to the mean exactly (no randomness consumed).
fn draw_column(
    points: &DMatrix<f64>,
    params: &LayerParams,
    mean: &DVector<f64>,
    seed: u64,
) -> Result<DVector<f64>> {
    if params.variance == 0.0 {
        return Ok(mean.clone());
    }
    let g = se_gram_on(points, params);
    let chol = robust_cholesky(&g)?;
    let xi = standard_normal_vector(points.nrows(), seed);
    Ok(mean + chol.l() * xi)
}

/// Stream tags: CDGP columns and augmented `d`-columns share the tag layout
/// `(layer, q)` so the augmented model with zero `W` variance reproduces the
/// compositional draws bit for bit.
fn tag(layer: usize, slot: usize) -> u64 {
    (layer as u64) << 32 | slot as u64
}

const FINAL_SLOT: usize = 0xFFFF_0000;
const W_SLOT_BASE: usize = 0x1000_0000;

/// Draw one prior sample of the configured hierarchy on `grid`.
/// Deterministic per `(cfg, seed)`; randomness streams are derived per
/// `(seed, layer, row)`, so samples are reproducible under parallel callers.
pub fn sample_prior(cfg: &DepthConfig, grid: &DMatrix<f64>, seed: u64) -> Result<PriorSampleGrid> {
    cfg.validate(grid.ncols())?;
    if grid.nrows() > MAX_GRID {
        return Err(Error::invalid(format!(
            "grid of {} points exceeds the {MAX_GRID}-point cap",
            grid.nrows()
        )));
    }
    let augmented = cfg.kind == ModelKind::TdgpAugmented;
    let mut layers: Vec<DMatrix<f64>> = Vec::with_capacity(cfg.depth);
    let mut layer_covs: Vec<DMatrix<f64>> = Vec::with_capacity(cfg.depth);
    let g = grid.nrows();
    let d_in = grid.ncols();

    let mut h = if augmented {
        let mut h0 = DMatrix::from_element(g, d_in + 1, 1.0);
        h0.view_mut((0, 0), (g, d_in)).copy_from(grid);
        h0
    } else {
        grid.clone()
    };
    layers.push(h.clone());

    for (idx, &width) in cfg.widths.iter().enumerate() {
        let layer = idx + 1;
        let params = &cfg.layers[idx];
        let next = match cfg.kind {
            ModelKind::Cdgp => {
                let mut out = DMatrix::zeros(g, width);
                for q in 0..width {
                    let mean = match cfg.mean_mode {
                        MeanMode::Zero => DVector::zeros(g),
                        MeanMode::LinearIdentity => h.column(q).into_owned(),
                    };
                    let col =
                        draw_column(&h, params, &mean, derive_stream(seed, tag(layer, q)))?;
                    out.set_column(q, &col);
                }
                out
            }
            ModelKind::Tdgp => {
                // W^l is width x D over the previous representation; the new
                // representation is W^l(h_{l-1}) x with the original inputs.
                let mut out = DMatrix::zeros(g, width);
                for q in 0..width {
                    for d in 0..d_in {
                        let mean = match cfg.mean_mode {
                            MeanMode::Zero => DVector::zeros(g),
                            MeanMode::LinearIdentity => {
                                DVector::from_element(g, if q == d { 1.0 } else { 0.0 })
                            }
                        };
                        let w_col = draw_column(
                            &h,
                            params,
                            &mean,
                            derive_stream(seed, tag(layer, W_SLOT_BASE + q * d_in + d)),
                        )?;
                        for i in 0..g {
                            out[(i, q)] += w_col[i] * grid[(i, d)];
                        }
                    }
                }
                out
            }
            ModelKind::TdgpAugmented => {
                // W block (width x D), d block (width), bottom row [0 .. 0 1].
                let mut out = DMatrix::from_element(g, width + 1, 1.0);
                for q in 0..width {
                    let d_mean = match cfg.mean_mode {
                        MeanMode::Zero => DVector::zeros(g),
                        MeanMode::LinearIdentity => h.column(q).into_owned(),
                    };
                    // d-block columns share the CDGP stream tags.
                    let d_col =
                        draw_column(&h, params, &d_mean, derive_stream(seed, tag(layer, q)))?;
                    for i in 0..g {
                        out[(i, q)] = d_col[i];
                    }
                    for d in 0..d_in {
                        let w_mean = DVector::zeros(g);
                        let w_params = LayerParams {
                            variance: params.w_variance.unwrap_or(params.variance),
                            ..*params
                        };
                        let w_col = draw_column(
                            &h,
                            &w_params,
                            &w_mean,
                            derive_stream(seed, tag(layer, W_SLOT_BASE + q * d_in + d)),
                        )?;
                        for i in 0..g {
                            out[(i, q)] += w_col[i] * grid[(i, d)];
                        }
                    }
                }
                out
            }
        };
        layer_covs.push(se_gram_on(&h, params));
        h = next;
        layers.push(h.clone());
    }

    let final_params = &cfg.layers[cfg.depth - 1];
    layer_covs.push(se_gram_on(&h, final_params));
    let kernel = move |a: &DVector<f64>, b: &DVector<f64>| -> f64 {
        let inv_l2 = 1.0 / (final_params.lengthscale * final_params.lengthscale);
        let mut acc = 0.0;
        for i in 0..a.len() {
            let d = a[i] - b[i];
            acc += d * d;
        }
        final_params.variance * (-0.5 * acc * inv_l2).exp()
    };
    let f = if final_params.variance == 0.0 {
        DVector::zeros(g)
    } else {
        sample_gp(
            &h,
            &kernel,
            &|_x| 0.0,
            derive_stream(seed, tag(cfg.depth, FINAL_SLOT)),
        )?
    };

    Ok(PriorSampleGrid {
        grid: grid.clone(),
        layers,
        f,
        layer_covs,
    })
}

/// One augmented layer applied to explicit block values:
/// `h = W x + d`, the top block of `[[W, d], [0, 1]] [x, 1]^T`.
pub fn augmented_layer(
    w_block: &DMatrix<f64>,
    d_block: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    if w_block.ncols() != x.len() || w_block.nrows() != d_block.len() {
        return Err(Error::shape(format!(
            "augmented_layer: W is {}x{}, d has {}, x has {}",
            w_block.nrows(),
            w_block.ncols(),
            d_block.len(),
            x.len()
        )));
    }
    Ok(w_block * x + d_block)
}
