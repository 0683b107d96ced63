//! Trained models as versioned JSON: architecture, genome and the flat
//! parameter vector.

use std::fs;
use std::path::Path;

use cmcnn_core::{ArchSpec, Genome, Model};
use serde::{Deserialize, Serialize};

use crate::error::{io_at, Error, Result};

pub const CHECKPOINT_FORMAT: &str = "cmcnn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub arch: ArchSpec,
    pub genome: Genome,
    pub params: Vec<f32>,
}

impl Checkpoint {
    pub fn from_model(model: &Model<f32>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            arch: *model.arch(),
            genome: model.genome().clone(),
            params: model.params().to_vec(),
        }
    }

    pub fn into_model(self) -> Result<Model<f32>> {
        Ok(Model::from_params(&self.arch, &self.genome, self.params)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(io_at(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_at(path))?;
        let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        check_header(path, &raw, CHECKPOINT_FORMAT, CHECKPOINT_VERSION)?;
        serde_json::from_value(raw).map_err(|e| Error::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Rejects documents whose `format`/`version` fields are not the expected ones.
pub(crate) fn check_header(
    path: &Path,
    raw: &serde_json::Value,
    format: &str,
    version: u32,
) -> Result<()> {
    let found_format = raw
        .get("format")
        .and_then(|v| v.as_str())
        .unwrap_or("<missing>");
    if found_format != format {
        return Err(Error::Version {
            path: path.to_path_buf(),
            what: "format",
            expected: format.into(),
            found: found_format.into(),
        });
    }
    let found_version = raw.get("version").and_then(|v| v.as_u64());
    if found_version != Some(version as u64) {
        return Err(Error::Version {
            path: path.to_path_buf(),
            what: "version",
            expected: version.to_string(),
            found: found_version.map_or("<missing>".into(), |v| v.to_string()),
        });
    }
    Ok(())
}
