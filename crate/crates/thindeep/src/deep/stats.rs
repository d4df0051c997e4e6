use nalgebra::DMatrix;

use super::{sample_prior, DepthConfig};
use crate::error::{Error, Result};

/// Mean absolute off-diagonal correlation of the final-layer kernel matrix at
/// one depth, averaged over seeds.
#[derive(Debug, Clone, Copy)]
pub struct SaturationStat {
    pub depth: usize,
    pub mean_abs_corr: f64,
    pub std_err: f64,
}

fn truncated(cfg: &DepthConfig, depth: usize) -> DepthConfig {
    DepthConfig {
        depth,
        widths: cfg.widths[..depth - 1].to_vec(),
        layers: cfg.layers[..depth].to_vec(),
        mean_mode: cfg.mean_mode,
        kind: cfg.kind,
    }
}

fn mean_abs_offdiag_corr(c: &DMatrix<f64>) -> f64 {
    let n = c.nrows();
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..i {
            let denom = (c[(i, i)] * c[(j, j)]).sqrt();
            if denom > 0.0 {
                acc += (c[(i, j)] / denom).abs();
            }
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        acc / count as f64
    }
}

/// Saturation statistics per depth `1 ..= cfg.depth`: the mean absolute
/// off-diagonal correlation of the kernel matrix the final layer draws from,
/// averaged over at least 30 seeds, with its standard error.
pub fn saturation_stats(
    cfg: &DepthConfig,
    grid: &DMatrix<f64>,
    seeds: &[u64],
) -> Result<Vec<SaturationStat>> {
    if seeds.len() < 30 {
        return Err(Error::invalid(format!(
            "saturation_stats needs at least 30 seeds, got {}",
            seeds.len()
        )));
    }
    let mut out = Vec::with_capacity(cfg.depth);
    for depth in 1..=cfg.depth {
        let sub = truncated(cfg, depth);
        let mut values = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let sample = sample_prior(&sub, grid, seed)?;
            values.push(mean_abs_offdiag_corr(
                sample.layer_covs.last().expect("at least one layer"),
            ));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        out.push(SaturationStat {
            depth,
            mean_abs_corr: mean,
            std_err: (var / n).sqrt(),
        });
    }
    Ok(out)
}

/// Flatness contrast between a shallow and a deep prior of the same kind.
#[derive(Debug, Clone, Copy)]
pub struct FlatnessSummary {
    /// Fraction of seeds whose deep sample has a smaller across-grid standard
    /// deviation than the shallow sample from the same seed.
    pub fraction_collapsed: f64,
    pub mean_std_shallow: f64,
    pub mean_std_deep: f64,
}

/// Compare the across-grid standard deviation of `f` between depth 1 and
/// `cfg.depth` over paired seeds.
pub fn flatness_fractions(
    cfg: &DepthConfig,
    grid: &DMatrix<f64>,
    seeds: &[u64],
) -> Result<FlatnessSummary> {
    if seeds.is_empty() {
        return Err(Error::invalid("flatness_fractions needs seeds"));
    }
    let shallow_cfg = truncated(cfg, 1);
    let mut collapsed = 0usize;
    let mut acc_shallow = 0.0;
    let mut acc_deep = 0.0;
    for &seed in seeds {
        let shallow = sample_prior(&shallow_cfg, grid, seed)?;
        let deep = sample_prior(cfg, grid, seed)?;
        let sd_shallow = sample_std(shallow.f.as_slice());
        let sd_deep = sample_std(deep.f.as_slice());
        if sd_deep < sd_shallow {
            collapsed += 1;
        }
        acc_shallow += sd_shallow;
        acc_deep += sd_deep;
    }
    let n = seeds.len() as f64;
    Ok(FlatnessSummary {
        fraction_collapsed: collapsed as f64 / n,
        mean_std_shallow: acc_shallow / n,
        mean_std_deep: acc_deep / n,
    })
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}
