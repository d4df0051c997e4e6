use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::Dataset;
use crate::error::{Error, Result};

/// Load a UTF-8, comma-separated, headered CSV of numeric columns. The column
/// named `target_column` becomes the target; every other column is a feature.
/// Non-numeric, NaN, or infinite entries are rejected with their line number.
pub fn load_csv(path: &Path, target_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Parse {
            line: 0,
            msg: format!("{}: {e}", path.display()),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: format!("target column `{target_column}` not found in header"),
        })?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for (rec_idx, record) in reader.records().enumerate() {
        let line = rec_idx + 2; // header is line 1
        let record = record.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, got {}", headers.len(), record.len()),
            });
        }
        let mut features = Vec::with_capacity(headers.len() - 1);
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("column `{}`: `{field}` is not numeric", headers[j]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("column `{}`: non-finite value {v}", headers[j]),
                });
            }
            if j == target_idx {
                targets.push(v);
            } else {
                features.push(v);
            }
        }
        rows.push(features);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 2,
            msg: "no data rows".to_string(),
        });
    }
    let n = rows.len();
    let d = feature_names.len();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let y = DVector::from_vec(targets);
    Ok(Dataset {
        x,
        y,
        feature_names,
        target_name: target_column.to_string(),
        folds: vec![0; n],
        norm: None,
    })
}

/// Write features + target back out as a headered CSV.
pub fn write_dataset_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("{}: {e}", path.display()),
    })?;
    let mut header = ds.feature_names.clone();
    header.push(ds.target_name.clone());
    writer
        .write_record(&header)
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
    for i in 0..ds.n() {
        let mut row: Vec<String> = (0..ds.dim()).map(|j| ds.x[(i, j)].to_string()).collect();
        row.push(ds.y[i].to_string());
        writer.write_record(&row).map_err(|e| Error::Parse {
            line: i + 2,
            msg: e.to_string(),
        })?;
    }
    writer.flush()?;
    Ok(())
}
