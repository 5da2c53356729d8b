use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

/// A list given either as a TOML array or as a comma-separated string.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum NumberList {
    Array(Vec<f64>),
    Text(String),
}

impl NumberList {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            NumberList::Array(v) => Ok(v.clone()),
            NumberList::Text(s) => parse_list(s),
        }
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("not a number: '{}'", p.trim())))
        })
        .collect()
}

/// Flat `key = value` settings; keys mirror the command-line flags with
/// dashes replaced by underscores.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub problem: Option<String>,
    pub alpha: Option<f64>,
    pub h: Option<f64>,
    pub steps: Option<usize>,
    pub nx: Option<usize>,
    pub dim: Option<usize>,
    pub tol: Option<f64>,
    pub boundary: Option<String>,
    pub out: Option<PathBuf>,
    pub alphas: Option<NumberList>,
    pub h_list: Option<NumberList>,
    pub h0: Option<f64>,
    pub levels: Option<usize>,
    pub tmax: Option<f64>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        FileConfig::parse(&text)
    }
}
