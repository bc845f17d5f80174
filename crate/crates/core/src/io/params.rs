//! JSON files for noise parameters, exposure curves and metric reports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::metrics::MetricsReport;
use crate::noise::{ExposureCurve, NoiseParams};

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let contents =
        std::fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    serde_json::from_str(&contents).map_err(|e| CoreError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value).map_err(|e| CoreError::invalid(e.to_string()))?;
    std::fs::write(path, body + "\n").map_err(|e| CoreError::io(path.display().to_string(), e))
}

#[derive(Serialize, Deserialize)]
struct ChannelNoise {
    alpha: f64,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct NoiseFile {
    channels: Vec<ChannelNoise>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    clamped_channels: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    config_digest: Option<String>,
}

/// `{ "channels": [ { "alpha": ..., "beta": ... }, ... ] }`
pub fn read_noise_json(path: impl AsRef<Path>) -> Result<NoiseParams> {
    let file: NoiseFile = read_json(path.as_ref())?;
    NoiseParams::new(
        file.channels.iter().map(|c| c.alpha).collect(),
        file.channels.iter().map(|c| c.beta).collect(),
    )
}

pub fn write_noise_json(
    path: impl AsRef<Path>,
    params: &NoiseParams,
    clamped_channels: Option<&[usize]>,
    config_digest: Option<&str>,
) -> Result<()> {
    let file = NoiseFile {
        channels: params
            .alpha()
            .iter()
            .zip(params.beta())
            .map(|(a, b)| ChannelNoise {
                alpha: *a,
                beta: *b,
            })
            .collect(),
        clamped_channels: clamped_channels.map(|c| c.to_vec()),
        config_digest: config_digest.map(str::to_string),
    };
    write_json(path.as_ref(), &file)
}

#[derive(Serialize, Deserialize)]
struct ExposureFile {
    #[serde(flatten)]
    curve: ExposureCurve,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    config_digest: Option<String>,
}

/// `{ "scale": ..., "exponent": ..., "t_min_s": ..., "t_max_s": ... }`
pub fn read_exposure_json(path: impl AsRef<Path>) -> Result<ExposureCurve> {
    let file: ExposureFile = read_json(path.as_ref())?;
    Ok(file.curve)
}

pub fn write_exposure_json(
    path: impl AsRef<Path>,
    curve: &ExposureCurve,
    config_digest: Option<&str>,
) -> Result<()> {
    let file = ExposureFile {
        curve: *curve,
        config_digest: config_digest.map(str::to_string),
    };
    write_json(path.as_ref(), &file)
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    #[serde(flatten)]
    report: &'a MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_digest: Option<&'a str>,
}

pub fn write_metrics_json(
    path: impl AsRef<Path>,
    report: &MetricsReport,
    config_digest: Option<&str>,
) -> Result<()> {
    write_json(
        path.as_ref(),
        &MetricsFile {
            report,
            config_digest,
        },
    )
}
