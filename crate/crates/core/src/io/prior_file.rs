//! Prior files: a JSON header plus a sibling binary payload.
//!
//! The header stores the grid, the probabilities (full precision in JSON)
//! and a SHA-256 checksum of the payload. The payload is the N x n
//! spectrum matrix as row-major little-endian f32.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::WavelengthGrid;
use crate::io::sha256_hex;
use crate::prior::{validate_prior, SpectraPrior};

#[derive(Serialize, Deserialize)]
struct PriorHeader {
    n: usize,
    #[serde(rename = "N")]
    count: usize,
    grid: WavelengthGrid,
    probs: Vec<f64>,
    payload: String,
    payload_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    config_digest: Option<String>,
}

fn payload_path(json_path: &Path) -> std::path::PathBuf {
    json_path.with_extension("bin")
}

/// Write `prior` as `<path>` (JSON header) plus `<path with .bin>` payload.
pub fn write_prior(
    json_path: impl AsRef<Path>,
    prior: &SpectraPrior,
    config_digest: Option<&str>,
) -> Result<()> {
    let json_path = json_path.as_ref();
    let bin_path = payload_path(json_path);

    let mut payload = Vec::with_capacity(prior.spectra().len() * 4);
    for v in prior.spectra() {
        payload.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    std::fs::write(&bin_path, &payload)
        .map_err(|e| CoreError::io(bin_path.display().to_string(), e))?;

    let header = PriorHeader {
        n: prior.dim(),
        count: prior.len(),
        grid: *prior.grid(),
        probs: prior.probs().to_vec(),
        payload: bin_path
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string(),
        payload_sha256: sha256_hex(&payload),
        config_digest: config_digest.map(str::to_string),
    };
    let body =
        serde_json::to_string_pretty(&header).map_err(|e| CoreError::invalid(e.to_string()))?;
    std::fs::write(json_path, body + "\n")
        .map_err(|e| CoreError::io(json_path.display().to_string(), e))
}

/// Read a prior written by [`write_prior`], verifying the payload checksum
/// and the prior invariants.
pub fn read_prior(json_path: impl AsRef<Path>) -> Result<SpectraPrior> {
    let json_path = json_path.as_ref();
    let text = std::fs::read_to_string(json_path)
        .map_err(|e| CoreError::io(json_path.display().to_string(), e))?;
    let header: PriorHeader = serde_json::from_str(&text).map_err(|e| CoreError::Parse {
        path: json_path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    if header.n != header.grid.count() {
        return Err(CoreError::invalid(format!(
            "prior header: n = {} does not match grid ({})",
            header.n, header.grid
        )));
    }
    let bin_path = json_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&header.payload);
    let payload =
        std::fs::read(&bin_path).map_err(|e| CoreError::io(bin_path.display().to_string(), e))?;
    let checksum = sha256_hex(&payload);
    if checksum != header.payload_sha256 {
        return Err(CoreError::invalid(format!(
            "prior payload checksum mismatch for {}: header says {}, file is {checksum}",
            bin_path.display(),
            header.payload_sha256
        )));
    }
    let expected_len = header.count * header.n * 4;
    if payload.len() != expected_len {
        return Err(CoreError::invalid(format!(
            "prior payload has {} bytes, expected {expected_len}",
            payload.len()
        )));
    }
    let mut spectra = Vec::with_capacity(header.count * header.n);
    for chunk in payload.chunks_exact(4) {
        spectra.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64);
    }
    let prior = SpectraPrior::from_parts_unchecked(header.grid, spectra, header.probs)?;
    let report = validate_prior(&prior);
    if let Some(v) = report.violations.first() {
        return Err(CoreError::invalid(format!(
            "prior file {} violates invariants: {v}",
            json_path.display()
        )));
    }
    Ok(prior)
}
