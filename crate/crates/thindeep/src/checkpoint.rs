//! Self-describing, versioned model checkpoints. A checkpoint carries the
//! trained parameters plus the normalized training batch and normalization
//! constants, so evaluation can rebuild the posterior without the original
//! files.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::data::Normalization;
use crate::error::{Error, Result};
use crate::tdgp::sgp::SgpModel;
use crate::tdgp::TdgpModel;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(tag = "model_kind")]
pub enum ModelState {
    #[serde(rename = "tdgp")]
    Tdgp { model: TdgpModel },
    #[serde(rename = "sgp")]
    Sgp { model: SgpModel },
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub state: ModelState,
    pub normalization: Normalization,
    /// Normalized training inputs (rows) the posterior is conditioned on.
    pub train_x: DMatrix<f64>,
    /// Normalized training targets.
    pub train_y: DVector<f64>,
    /// Set when training aborted and these are last-good parameters.
    pub partial: bool,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)
            .map_err(|e| Error::Config(format!("checkpoint serialization: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let ck: Checkpoint = serde_json::from_str(&raw).map_err(|e| Error::Parse {
            line: 0,
            msg: format!("{}: {e}", path.display()),
        })?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint version {} unsupported (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        Ok(ck)
    }
}
