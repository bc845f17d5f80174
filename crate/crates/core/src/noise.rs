//! Heteroscedastic sensor noise and the auto-exposure model.
//!
//! The collected charge at a sensor carries Gaussian noise with variance
//! `alpha * charge + beta` per channel. After photometric normalization
//! (division by exposure time `t` and gain), the noiseless signal `c_bar`
//! observes noise of standard deviation
//!
//! ```text
//! sigma(c_bar) = sqrt(alpha * c_bar * t + beta) / t
//! ```
//!
//! which is independent of gain. Post-amplification noise is neglected.
//! Exposure time itself follows scene brightness through a clamped power
//! law mimicking a camera's auto-exposure.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng;
use crate::system::CameraSignal;

/// Per-channel noise coefficients: `alpha` scales the signal-dependent
/// (shot) variance, `beta` is the signal-independent (read) variance floor.
/// Both are in charge-domain units.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseParams {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl NoiseParams {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(CoreError::EmptyInput("noise parameters"));
        }
        if alpha.len() != beta.len() {
            return Err(CoreError::invalid(format!(
                "alpha has {} channels but beta has {}",
                alpha.len(),
                beta.len()
            )));
        }
        for v in alpha.iter().chain(beta.iter()) {
            if !v.is_finite() || *v < 0.0 {
                return Err(CoreError::invalid(format!(
                    "noise parameters must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(Self { alpha, beta })
    }

    pub fn channels(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Parameters for a k-camera stack. Accepts either per-system values
    /// (already `3k` channels) or per-camera values (3 channels, tiled k
    /// times under the assumption that all cameras share a sensor model).
    pub fn for_cameras(&self, cameras: usize) -> Result<NoiseParams> {
        let want = 3 * cameras;
        if self.channels() == want {
            return Ok(self.clone());
        }
        if self.channels() == 3 {
            let alpha: Vec<f64> = self.alpha.iter().cycle().take(want).copied().collect();
            let beta: Vec<f64> = self.beta.iter().cycle().take(want).copied().collect();
            return NoiseParams::new(alpha, beta);
        }
        Err(CoreError::invalid(format!(
            "noise parameters have {} channels; need 3 or {want} for {cameras} cameras",
            self.channels()
        )))
    }
}

/// Capture settings kept for raw-domain round trips. The normalized-signal
/// noise law does not depend on gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureSettings {
    exposure_s: f64,
    gain: f64,
}

impl CaptureSettings {
    pub fn new(exposure_s: f64, gain: f64) -> Result<Self> {
        if !(exposure_s > 0.0) || !exposure_s.is_finite() {
            return Err(CoreError::invalid(format!(
                "exposure must be positive, got {exposure_s} s"
            )));
        }
        if !(gain > 0.0) || !gain.is_finite() {
            return Err(CoreError::invalid(format!("gain must be positive, got {gain}")));
        }
        Ok(Self { exposure_s, gain })
    }

    pub fn exposure_s(&self) -> f64 {
        self.exposure_s
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// Raw sensor value for a photometrically normalized signal.
    pub fn raw_from_normalized(&self, normalized: f64) -> f64 {
        normalized * self.exposure_s * self.gain
    }

    /// Photometric normalization of a raw (black-subtracted) value.
    pub fn normalized_from_raw(&self, raw: f64) -> f64 {
        raw / (self.exposure_s * self.gain)
    }
}

/// Auto-exposure model: `t = clamp(scale * brightness^exponent, t_min, t_max)`,
/// with `t = t_max` for a fully dark scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExposureCurve")]
pub struct ExposureCurve {
    pub scale: f64,
    pub exponent: f64,
    pub t_min_s: f64,
    pub t_max_s: f64,
}

#[derive(Deserialize)]
struct RawExposureCurve {
    scale: f64,
    exponent: f64,
    t_min_s: f64,
    t_max_s: f64,
}

impl TryFrom<RawExposureCurve> for ExposureCurve {
    type Error = CoreError;

    fn try_from(raw: RawExposureCurve) -> Result<Self> {
        ExposureCurve::new(raw.scale, raw.exponent, raw.t_min_s, raw.t_max_s)
    }
}

impl ExposureCurve {
    pub fn new(scale: f64, exponent: f64, t_min_s: f64, t_max_s: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() || !exponent.is_finite() {
            return Err(CoreError::invalid(
                "exposure curve scale must be positive and exponent finite".to_string(),
            ));
        }
        if !(t_min_s > 0.0) || !(t_min_s <= t_max_s) || !t_max_s.is_finite() {
            return Err(CoreError::invalid(format!(
                "exposure bounds must satisfy 0 < t_min <= t_max, got [{t_min_s}, {t_max_s}]"
            )));
        }
        Ok(Self {
            scale,
            exponent,
            t_min_s,
            t_max_s,
        })
    }
}

impl Default for ExposureCurve {
    /// Nominal smartphone-like defaults. These are artifact conventions
    /// chosen for plausible behavior, not measured device values; fit or
    /// configure a curve for any real sensor.
    fn default() -> Self {
        Self {
            scale: 0.04,
            exponent: -0.9,
            t_min_s: 1e-4,
            t_max_s: 0.25,
        }
    }
}

/// Noise standard deviation of a photometrically normalized signal.
pub fn sigma(c_bar: f64, channel: usize, t: f64, params: &NoiseParams) -> Result<f64> {
    if channel >= params.channels() {
        return Err(CoreError::invalid(format!(
            "channel {channel} out of range for {} noise channels",
            params.channels()
        )));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(CoreError::invalid(format!("exposure must be positive, got {t} s")));
    }
    if !(c_bar >= 0.0) {
        return Err(CoreError::invalid(format!(
            "noiseless signal must be nonnegative, got {c_bar}"
        )));
    }
    Ok(sigma_unchecked(
        c_bar,
        params.alpha[channel],
        params.beta[channel],
        t,
    ))
}

#[inline]
pub(crate) fn sigma_unchecked(c_bar: f64, alpha: f64, beta: f64, t: f64) -> f64 {
    (alpha * c_bar * t + beta).sqrt() / t
}

/// Add heteroscedastic Gaussian noise to a noiseless signal. Deterministic
/// for a given seed; each channel draws from its own counter so results do
/// not depend on evaluation order.
pub fn sample_noise(
    c_bar: &CameraSignal,
    t: f64,
    params: &NoiseParams,
    seed: u64,
) -> Result<CameraSignal> {
    if c_bar.len() != params.channels() {
        return Err(CoreError::invalid(format!(
            "signal has {} channels but noise parameters have {}",
            c_bar.len(),
            params.channels()
        )));
    }
    let key = rng::derive_stream(seed, "noise/sample");
    let mut out = Vec::with_capacity(c_bar.len());
    for (ch, &v) in c_bar.values().iter().enumerate() {
        let s = sigma(v, ch, t, params)?;
        out.push(v + rng::standard_normal(key, ch as u64) * s);
    }
    CameraSignal::new(out)
}

/// Result of fitting the noise law to patch statistics. Channels whose raw
/// least-squares coefficients came out negative are clamped to zero and
/// listed in `clamped_channels`.
#[derive(Debug, Clone)]
pub struct NoiseFit {
    pub params: NoiseParams,
    pub clamped_channels: Vec<usize>,
}

/// Fit `alpha`, `beta` per channel from flat-patch statistics in the charge
/// domain: points `(mean_charge, std_charge) = (c_bar * t, sigma * t)`.
/// The variance `std_charge^2 = alpha * mean_charge + beta` is linear in the
/// parameters, so an ordinary least-squares line fit is exact at the optimum.
pub fn fit_noise_params(patch_stats: &[Vec<(f64, f64)>]) -> Result<NoiseFit> {
    if patch_stats.is_empty() {
        return Err(CoreError::EmptyInput("patch statistics"));
    }
    let mut alpha = Vec::with_capacity(patch_stats.len());
    let mut beta = Vec::with_capacity(patch_stats.len());
    let mut clamped = Vec::new();
    for (ch, points) in patch_stats.iter().enumerate() {
        if points.len() < 2 {
            return Err(CoreError::invalid(format!(
                "channel {ch}: need at least 2 patch statistics, got {}",
                points.len()
            )));
        }
        let n = points.len() as f64;
        let mean_m = points.iter().map(|(m, _)| m).sum::<f64>() / n;
        let mean_v = points.iter().map(|(_, s)| s * s).sum::<f64>() / n;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (m, s) in points {
            sxx += (m - mean_m) * (m - mean_m);
            sxy += (m - mean_m) * (s * s - mean_v);
        }
        if sxx == 0.0 {
            return Err(CoreError::invalid(format!(
                "channel {ch}: all patch means identical, variance slope is undetermined"
            )));
        }
        let mut a = sxy / sxx;
        let mut b = mean_v - a * mean_m;
        if a < 0.0 || b < 0.0 {
            clamped.push(ch);
            a = a.max(0.0);
            b = b.max(0.0);
        }
        alpha.push(a);
        beta.push(b);
    }
    Ok(NoiseFit {
        params: NoiseParams::new(alpha, beta)?,
        clamped_channels: clamped,
    })
}

/// Exposure time chosen by the auto-exposure model for a scene brightness.
/// Total on `brightness >= 0`; a fully dark scene gets the longest exposure.
pub fn exposure_time(brightness: f64, curve: &ExposureCurve) -> f64 {
    if brightness <= 0.0 {
        return curve.t_max_s;
    }
    (curve.scale * brightness.powf(curve.exponent)).clamp(curve.t_min_s, curve.t_max_s)
}

/// Mean of all pixel values across channels; the brightness proxy the
/// auto-exposure model consumes.
pub fn scene_brightness(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(CoreError::EmptyInput("image"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
