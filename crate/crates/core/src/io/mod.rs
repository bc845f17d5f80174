//! File formats.
//!
//! Text formats are CSV with a `wavelength_nm` leading column; lines
//! starting with `#` are comments (writers use one to embed provenance).
//! Large numeric payloads (priors, cubes, captures) are split into a JSON
//! sidecar describing shape and layout plus a raw little-endian binary
//! file next to it.

mod csv;
mod cube_file;
mod params;
mod prior_file;

pub use csv::{
    read_calibration_samples, read_divisor_csv, read_filter_csv, read_filter_library,
    read_patch_stats, read_spectrum_csv, read_ssf_csv, write_divisor_csv, write_filter_csv,
    write_ranking_csv, write_spectrum_csv, write_ssf_csv,
};
pub use cube_file::{read_capture, read_cube, write_capture, write_cube, FileMeta};
pub use params::{
    read_exposure_json, read_noise_json, write_exposure_json, write_metrics_json,
    write_noise_json,
};
pub use prior_file::{read_prior, write_prior};

use crate::error::{CoreError, Result};
use crate::grid::WavelengthGrid;

/// Reconstruct a uniform grid from an explicit wavelength list, enforcing
/// strictly increasing, evenly spaced values.
pub fn grid_from_wavelengths(wavelengths: &[f64], context: &str) -> Result<WavelengthGrid> {
    if wavelengths.len() < 2 {
        return Err(CoreError::invalid(format!(
            "{context}: need at least 2 wavelengths, got {}",
            wavelengths.len()
        )));
    }
    let start = wavelengths[0];
    let end = *wavelengths.last().unwrap();
    let step = (end - start) / (wavelengths.len() - 1) as f64;
    if !(step > 0.0) {
        return Err(CoreError::invalid(format!(
            "{context}: wavelengths must be strictly increasing"
        )));
    }
    for (i, w) in wavelengths.iter().enumerate() {
        if i > 0 && *w <= wavelengths[i - 1] {
            return Err(CoreError::invalid(format!(
                "{context}: wavelengths must be strictly increasing (row {i})"
            )));
        }
        let expected = start + i as f64 * step;
        if (w - expected).abs() > 1e-6 * step {
            return Err(CoreError::invalid(format!(
                "{context}: wavelengths are not uniformly spaced at index {i} ({w} vs {expected})"
            )));
        }
    }
    WavelengthGrid::new(start, step, wavelengths.len())
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
