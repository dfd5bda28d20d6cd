use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{LabError, Result};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| LabError::Serde(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| LabError::Serde(e.to_string()))?;
    w.write_record(header).map_err(|e| LabError::Serde(e.to_string()))?;
    for row in rows {
        // `{:e}` round-trips f64 exactly and is platform independent.
        w.write_record(row.iter().map(|x| format!("{x:e}"))).map_err(|e| LabError::Serde(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub grids: Vec<GridEntry>,
    /// Certified discretization error per ε where a reference run was made.
    pub certified_errors: Vec<(f64, f64)>,
    pub outputs: Vec<String>,
    pub passed: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridEntry {
    pub eps: f64,
    pub n: usize,
    pub length: f64,
    pub dt: f64,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            command: command.into(),
            config_hash: cfg.hash(),
            config: cfg.clone(),
            grids: Vec::new(),
            certified_errors: Vec::new(),
            outputs: Vec::new(),
            passed: None,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}
