//! Settings file for the non-experiment subcommands. Every field is
//! optional; command-line flags take precedence over the file.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::emit::Format;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub objective: Option<String>,
    /// `key=value` overrides for `verify`.
    pub params: Vec<String>,
    pub check: Option<String>,
    pub m0: Option<Vec<f64>>,
    pub sigma0: Option<f64>,
    pub max_iters: Option<u64>,
    pub f_target: Option<f64>,
    pub c_plus: Option<f64>,
    pub c_minus: Option<f64>,
    pub what: Option<String>,
    pub m: Option<Vec<f64>>,
    pub sigma: Option<f64>,
    pub n: Option<u64>,
}

impl CliConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| crate::usage(format!("{}: {e}", path.display())))
    }
}
