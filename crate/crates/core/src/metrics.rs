//! Reconstruction quality metrics: PSNR, spectral angle, normalized
//! spectral error. All three respect a per-pixel validity mask.

use serde::{Deserialize, Serialize};

use crate::cube::HsiCube;
use crate::error::{CoreError, Result};
use crate::grid::ensure_same_grid;

/// Reported ceiling for PSNR; a zero-MSE comparison saturates here so
/// reports stay serializable.
pub const PSNR_CAP_DB: f64 = 100.0;

/// Angle between two vectors in degrees, `None` if either has zero norm.
/// Uses the chord formula `2 asin(||u - v|| / 2)` on normalized vectors:
/// exact for equal or power-of-two-scaled inputs and stable near zero,
/// where the cosine form loses eight digits.
pub(crate) fn spectral_angle_deg(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let mut chord_sq = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x / na - y / nb;
        chord_sq += d * d;
    }
    let half = (chord_sq.sqrt() / 2.0).min(1.0);
    Some(2.0 * half.asin().to_degrees())
}

/// Spectral angle statistics over the masked pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamStats {
    pub mean_deg: f64,
    pub used_pixels: usize,
    /// Pixels skipped because one of the spectra had zero norm.
    pub excluded_pixels: usize,
}

/// Normalized spectral error statistics over the masked pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NseStats {
    pub mean_pct: f64,
    pub used_pixels: usize,
    /// Pixels skipped because the reference had zero L1 norm.
    pub excluded_pixels: usize,
}

/// Combined metric report, shaped like the serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub psnr_db: f64,
    pub sam_deg: f64,
    pub nse_pct: f64,
    /// Pixels that entered the comparison after masking.
    pub valid_pixels: usize,
    pub peak_used: f64,
    pub sam_excluded_pixels: usize,
    pub nse_excluded_pixels: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

/// Pixels considered by the metrics: the explicit mask (if any) intersected
/// with both cubes' own masks.
fn effective_mask(pred: &HsiCube, gt: &HsiCube, mask: Option<&[bool]>) -> Result<Vec<bool>> {
    if pred.height() != gt.height() || pred.width() != gt.width() {
        return Err(CoreError::invalid(format!(
            "cube sizes differ: {}x{} vs {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    ensure_same_grid(pred.grid(), gt.grid())?;
    let pixels = pred.pixel_count();
    if let Some(m) = mask {
        if m.len() != pixels {
            return Err(CoreError::invalid(format!(
                "mask has {} entries, expected {pixels}",
                m.len()
            )));
        }
    }
    let out: Vec<bool> = (0..pixels)
        .map(|p| mask.map_or(true, |m| m[p]) && pred.is_valid(p) && gt.is_valid(p))
        .collect();
    if !out.iter().any(|v| *v) {
        return Err(CoreError::EmptyInput("metric mask"));
    }
    Ok(out)
}

/// Peak signal-to-noise ratio in dB over masked voxels, capped at
/// [`PSNR_CAP_DB`]. `peak` is an explicit parameter because normalized
/// radiance has no fixed full scale; a common choice is the maximum of the
/// reference cube.
pub fn psnr(pred: &HsiCube, gt: &HsiCube, mask: Option<&[bool]>, peak: f64) -> Result<f64> {
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(CoreError::invalid(format!("peak must be positive, got {peak}")));
    }
    let m = effective_mask(pred, gt, mask)?;
    let mut sq = 0.0;
    let mut count = 0usize;
    for (p, keep) in m.iter().enumerate() {
        if !keep {
            continue;
        }
        for (a, b) in pred.pixel(p).iter().zip(gt.pixel(p)) {
            let d = a - b;
            sq += d * d;
        }
        count += gt.bands();
    }
    let mse = sq / count as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

/// Mean spectral angle in degrees over masked pixels where both spectra
/// have positive norm.
pub fn sam(pred: &HsiCube, gt: &HsiCube, mask: Option<&[bool]>) -> Result<SamStats> {
    let m = effective_mask(pred, gt, mask)?;
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for (p, keep) in m.iter().enumerate() {
        if !keep {
            continue;
        }
        match spectral_angle_deg(pred.pixel(p), gt.pixel(p)) {
            Some(angle) => {
                sum += angle;
                used += 1;
            }
            None => excluded += 1,
        }
    }
    if used == 0 {
        return Err(CoreError::invalid(
            "no masked pixel has positive norm in both cubes".to_string(),
        ));
    }
    Ok(SamStats {
        mean_deg: sum / used as f64,
        used_pixels: used,
        excluded_pixels: excluded,
    })
}

/// Mean L1 error relative to the reference's L1 norm, in percent, over
/// masked pixels with a nonzero reference.
pub fn nse(pred: &HsiCube, gt: &HsiCube, mask: Option<&[bool]>) -> Result<NseStats> {
    let m = effective_mask(pred, gt, mask)?;
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for (p, keep) in m.iter().enumerate() {
        if !keep {
            continue;
        }
        let a = pred.pixel(p);
        let b = gt.pixel(p);
        let l1_ref: f64 = b.iter().map(|v| v.abs()).sum();
        if l1_ref == 0.0 {
            excluded += 1;
            continue;
        }
        let l1_err: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
        sum += l1_err / l1_ref * 100.0;
        used += 1;
    }
    if used == 0 {
        return Err(CoreError::invalid(
            "every masked reference pixel is zero".to_string(),
        ));
    }
    Ok(NseStats {
        mean_pct: sum / used as f64,
        used_pixels: used,
        excluded_pixels: excluded,
    })
}

/// All three metrics in one report.
pub fn evaluate(
    pred: &HsiCube,
    gt: &HsiCube,
    mask: Option<&[bool]>,
    peak: f64,
) -> Result<MetricsReport> {
    let m = effective_mask(pred, gt, mask)?;
    let valid = m.iter().filter(|v| **v).count();
    let psnr_db = psnr(pred, gt, mask, peak)?;
    let sam_stats = sam(pred, gt, mask)?;
    let nse_stats = nse(pred, gt, mask)?;
    Ok(MetricsReport {
        psnr_db,
        sam_deg: sam_stats.mean_deg,
        nse_pct: nse_stats.mean_pct,
        valid_pixels: valid,
        peak_used: peak,
        sam_excluded_pixels: sam_stats.excluded_pixels,
        nse_excluded_pixels: nse_stats.excluded_pixels,
        seed: None,
    })
}
