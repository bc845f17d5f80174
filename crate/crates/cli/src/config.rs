//! Run configuration: a JSON document whose keys individual flags
//! override (flag > config > default), plus the digest that every output
//! file embeds so reruns with changed inputs are distinguishable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub n_samples: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub k: Option<usize>,
    pub stride: Option<usize>,
    pub lambda: Option<f64>,
    pub peak: Option<f64>,
    /// Relative standard error at which the Monte Carlo estimator stops
    /// early; `null` disables early stopping.
    pub early_stop_rel: Option<f64>,
    pub uniform_weights: Option<bool>,
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub corpus: Option<Vec<PathBuf>>,
    pub illuminant: Option<PathBuf>,
    pub prior: Option<PathBuf>,
    pub library: Option<PathBuf>,
    pub ssf_main: Option<PathBuf>,
    pub ssf_tele: Option<PathBuf>,
    pub ssf_wide: Option<PathBuf>,
    pub filter_tele: Option<PathBuf>,
    pub filter_wide: Option<PathBuf>,
    pub noise: Option<PathBuf>,
    pub exposure: Option<PathBuf>,
    pub cube: Option<PathBuf>,
    pub capture: Option<PathBuf>,
    pub pred: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub samples_csv: Option<PathBuf>,
    pub spectra_dir: Option<PathBuf>,
    pub patch_stats: Option<PathBuf>,
    pub device_spectrum: Option<PathBuf>,
    pub reference_spectrum: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("invalid config {}: {e}", path.display())))
    }
}

/// A required input path: the flag wins, then the config key.
pub fn require_path(
    flag: &Option<PathBuf>,
    config: &Option<PathBuf>,
    name: &str,
) -> Result<PathBuf, CliError> {
    flag.clone().or_else(|| config.clone()).ok_or_else(|| {
        CliError::input(format!(
            "missing input '{name}': pass --{} or set paths.{} in the config",
            name.replace('_', "-"),
            name
        ))
    })
}

pub fn resolve<T: Clone>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

/// Accumulates the effective configuration and the contents of every input
/// file into one hex digest.
pub struct DigestBuilder {
    hasher: Sha256,
    /// (label, path) pairs recorded for provenance output.
    inputs: Vec<(String, PathBuf)>,
}

impl DigestBuilder {
    pub fn new(command: &str, effective: &serde_json::Value) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        hasher.update([0u8]);
        hasher.update(effective.to_string().as_bytes());
        Self {
            hasher,
            inputs: Vec::new(),
        }
    }

    /// Hash one input file's bytes under a label.
    pub fn input(&mut self, label: &str, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        self.hasher.update([0u8]);
        self.hasher.update(label.as_bytes());
        self.hasher.update([0u8]);
        self.hasher.update(&bytes);
        self.inputs.push((label.to_string(), path.to_path_buf()));
        Ok(())
    }

    pub fn inputs(&self) -> &[(String, PathBuf)] {
        &self.inputs
    }

    pub fn finish(self) -> String {
        let out = self.hasher.finalize();
        let mut s = String::with_capacity(64);
        for b in out {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let out = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    Ok(s)
}
