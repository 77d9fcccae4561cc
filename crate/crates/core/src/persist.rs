//! Versioned model files.
//!
//! A model file is a JSON object
//! `{"format": "mgpch-model", "version": 1, "asset_names": [...], "model": {...}, "copulas": [...]}`.
//! Unknown keys are rejected, and floats are written in shortest round-trip
//! form so reading a file back reproduces every value exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::copula::PairwiseCopulaModel;
use crate::error::{Error, Result};
use crate::mgpch::MgpchModel;

pub const FORMAT_NAME: &str = "mgpch-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub asset_names: Vec<String>,
    pub model: MgpchModel,
    #[serde(default)]
    pub copulas: Vec<PairwiseCopulaModel>,
}

impl ModelFile {
    pub fn new(model: MgpchModel, asset_names: Vec<String>, copulas: Vec<PairwiseCopulaModel>) -> Result<Self> {
        if asset_names.len() != model.data.output_dim() {
            return Err(Error::invalid(format!(
                "{} asset names for a model with {} outputs",
                asset_names.len(),
                model.data.output_dim()
            )));
        }
        Ok(Self { format: FORMAT_NAME.into(), version: FORMAT_VERSION, asset_names, model, copulas })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))?;
        if file.format != FORMAT_NAME {
            return Err(Error::ModelFile(format!("expected format '{FORMAT_NAME}', found '{}'", file.format)));
        }
        if file.version != FORMAT_VERSION {
            return Err(Error::ModelFile(format!("unsupported version {} (expected {FORMAT_VERSION})", file.version)));
        }
        if file.asset_names.len() != file.model.data.output_dim() {
            return Err(Error::ModelFile("asset names do not match the model outputs".into()));
        }
        let (dim, c) = (file.model.data.output_dim(), file.model.truncation());
        if file.model.state.responsibilities.shape() != (file.model.data.len(), c)
            || file.model.hyper.m_tilde.shape() != (c, dim)
        {
            return Err(Error::ModelFile("posterior arrays do not match the data shape".into()));
        }
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
