//! Evaluation metrics (NLPD, MRAE) and cross-validated reports.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Average negative log predictive density under per-point Gaussians,
/// `mean_i [ 1/2 log(2 pi v_i) + (y_i - mu_i)^2 / (2 v_i) ]`,
/// computed on whatever scale the inputs carry (normalized targets here).
pub fn nlpd(pred_mean: &DVector<f64>, pred_var: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    let n = y.len();
    if pred_mean.len() != n || pred_var.len() != n {
        return Err(Error::shape("nlpd: length mismatch"));
    }
    if n == 0 {
        return Err(Error::invalid("nlpd: empty batch"));
    }
    let mut acc = 0.0;
    for i in 0..n {
        let v = pred_var[i];
        if !(v > 0.0) {
            return Err(Error::invalid(format!(
                "nlpd: non-positive variance {v} at index {i} (clamping happens upstream)"
            )));
        }
        let r = y[i] - pred_mean[i];
        acc += 0.5 * (2.0 * std::f64::consts::PI * v).ln() + r * r / (2.0 * v);
    }
    Ok(acc / n as f64)
}

/// How the relative error denominator is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MraeMode {
    /// `|mu_i - y_i| / max(|y_i|, 1e-8)`, averaged (default).
    PerPoint,
    /// `|mu_i - y_i|` normalized by the mean absolute deviation of `y`.
    MeanAbsDeviation,
}

/// Mean relative absolute error of predictive means.
pub fn mrae(pred_mean: &DVector<f64>, y: &DVector<f64>, mode: MraeMode) -> Result<f64> {
    let n = y.len();
    if pred_mean.len() != n {
        return Err(Error::shape("mrae: length mismatch"));
    }
    if n == 0 {
        return Err(Error::invalid("mrae: empty batch"));
    }
    match mode {
        MraeMode::PerPoint => {
            let mut acc = 0.0;
            for i in 0..n {
                acc += (pred_mean[i] - y[i]).abs() / y[i].abs().max(1e-8);
            }
            Ok(acc / n as f64)
        }
        MraeMode::MeanAbsDeviation => {
            let y_bar = y.mean();
            let mad = y.iter().map(|v| (v - y_bar).abs()).sum::<f64>() / n as f64;
            let err = (pred_mean - y).abs().sum() / n as f64;
            Ok(err / mad.max(1e-8))
        }
    }
}

/// Metrics of a single fold.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_test: usize,
    pub nlpd: f64,
    /// NLPD on the original target scale: `nlpd + ln(std_y)`.
    pub nlpd_denormalized: f64,
    pub mrae: f64,
    pub variance_clamps: usize,
    pub wall_secs: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AggregateMetrics {
    pub nlpd_mean: f64,
    pub nlpd_std: f64,
    pub mrae_mean: f64,
    pub mrae_std: f64,
}

/// Per-fold and aggregate evaluation results.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub dataset: String,
    pub folds: Vec<FoldMetrics>,
    pub aggregate: AggregateMetrics,
}

impl EvalReport {
    pub fn new(model: &str, dataset: &str, folds: Vec<FoldMetrics>) -> Self {
        let k = folds.len().max(1) as f64;
        let nlpd_mean = folds.iter().map(|f| f.nlpd).sum::<f64>() / k;
        let mrae_mean = folds.iter().map(|f| f.mrae).sum::<f64>() / k;
        let nlpd_std = (folds
            .iter()
            .map(|f| (f.nlpd - nlpd_mean).powi(2))
            .sum::<f64>()
            / k)
            .sqrt();
        let mrae_std = (folds
            .iter()
            .map(|f| (f.mrae - mrae_mean).powi(2))
            .sum::<f64>()
            / k)
            .sqrt();
        EvalReport {
            model: model.to_string(),
            dataset: dataset.to_string(),
            folds,
            aggregate: AggregateMetrics {
                nlpd_mean,
                nlpd_std,
                mrae_mean,
                mrae_std,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One flat CSV row per (model, dataset, fold), plus header. Wall-clock
    /// stays in the JSON report so the metrics CSV is byte-identical across
    /// reruns of the same config.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "model,dataset,fold,n_test,nlpd,nlpd_denormalized,mrae,variance_clamps\n",
        );
        for f in &self.folds {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.model,
                self.dataset,
                f.fold,
                f.n_test,
                f.nlpd,
                f.nlpd_denormalized,
                f.mrae,
                f.variance_clamps
            ));
        }
        out
    }
}
