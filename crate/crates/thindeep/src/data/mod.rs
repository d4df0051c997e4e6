//! Datasets: the synthetic funnel generator, CSV ingestion, normalization
//! against training statistics, and fold assignment.

mod io;
mod synthetic;

pub use io::{load_csv, write_dataset_csv};
pub use synthetic::{funnel_g, funnel_h, gen_synthetic};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Per-column input statistics and target statistics fitted on training rows.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Normalization {
    pub x_mean: DVector<f64>,
    pub x_std: DVector<f64>,
    pub y_mean: f64,
    pub y_std: f64,
}

impl Normalization {
    pub fn transform_x(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for j in 0..out.ncols() {
            for i in 0..out.nrows() {
                out[(i, j)] = (out[(i, j)] - self.x_mean[j]) / self.x_std[j];
            }
        }
        out
    }

    pub fn transform_y(&self, y: &DVector<f64>) -> DVector<f64> {
        y.map(|v| (v - self.y_mean) / self.y_std)
    }

    pub fn inverse_x(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for j in 0..out.ncols() {
            for i in 0..out.nrows() {
                out[(i, j)] = out[(i, j)] * self.x_std[j] + self.x_mean[j];
            }
        }
        out
    }

    pub fn inverse_y(&self, y: &DVector<f64>) -> DVector<f64> {
        y.map(|v| v * self.y_std + self.y_mean)
    }
}

/// Inputs, targets, fold labels, and (once fitted) normalization constants.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub folds: Vec<usize>,
    pub norm: Option<Normalization>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Row indices with the given fold label.
    pub fn fold_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.folds[i] == fold).collect()
    }

    /// Sub-dataset with the given rows (fold labels reset to 0).
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let x = DMatrix::from_fn(rows.len(), self.dim(), |i, j| self.x[(rows[i], j)]);
        let y = DVector::from_fn(rows.len(), |i, _| self.y[rows[i]]);
        Dataset {
            x,
            y,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            folds: vec![0; rows.len()],
            norm: self.norm.clone(),
        }
    }
}

/// Fit normalization constants on the masked training rows and transform the
/// whole dataset with them. Test rows are transformed with the training
/// constants; columns with (population) std below `1e-12` are rejected.
pub fn normalize(ds: &Dataset, train_mask: &[bool]) -> Result<Dataset> {
    if train_mask.len() != ds.n() {
        return Err(Error::shape(format!(
            "normalize: mask len {} vs {} rows",
            train_mask.len(),
            ds.n()
        )));
    }
    let train_rows: Vec<usize> = (0..ds.n()).filter(|&i| train_mask[i]).collect();
    if train_rows.is_empty() {
        return Err(Error::invalid("normalize: empty training mask"));
    }
    let nt = train_rows.len() as f64;
    let d = ds.dim();
    let mut x_mean = DVector::zeros(d);
    let mut x_std = DVector::zeros(d);
    for j in 0..d {
        let mean = train_rows.iter().map(|&i| ds.x[(i, j)]).sum::<f64>() / nt;
        let var = train_rows
            .iter()
            .map(|&i| {
                let c = ds.x[(i, j)] - mean;
                c * c
            })
            .sum::<f64>()
            / nt;
        let std = var.sqrt();
        if std < 1e-12 {
            return Err(Error::invalid(format!(
                "normalize: column `{}` is constant on the training rows",
                ds.feature_names
                    .get(j)
                    .cloned()
                    .unwrap_or_else(|| format!("x{j}"))
            )));
        }
        x_mean[j] = mean;
        x_std[j] = std;
    }
    let y_mean = train_rows.iter().map(|&i| ds.y[i]).sum::<f64>() / nt;
    let y_var = train_rows
        .iter()
        .map(|&i| {
            let c = ds.y[i] - y_mean;
            c * c
        })
        .sum::<f64>()
        / nt;
    let y_std = y_var.sqrt();
    if y_std < 1e-12 {
        return Err(Error::invalid(format!(
            "normalize: target `{}` is constant on the training rows",
            ds.target_name
        )));
    }
    let norm = Normalization {
        x_mean,
        x_std,
        y_mean,
        y_std,
    };
    Ok(Dataset {
        x: norm.transform_x(&ds.x),
        y: norm.transform_y(&ds.y),
        feature_names: ds.feature_names.clone(),
        target_name: ds.target_name.clone(),
        folds: ds.folds.clone(),
        norm: Some(norm),
    })
}

/// Deterministic k-fold assignment: a seeded shuffle followed by round-robin
/// labels, so fold sizes differ by at most one.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid("kfold: k must be at least 2"));
    }
    if k > n {
        return Err(Error::invalid(format!("kfold: k = {k} exceeds {n} rows")));
    }
    let perm = seeded_permutation(n, seed);
    let mut folds = vec![0usize; n];
    for (pos, &row) in perm.iter().enumerate() {
        folds[row] = pos % k;
    }
    Ok(folds)
}

pub(crate) fn seeded_permutation(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    perm
}
