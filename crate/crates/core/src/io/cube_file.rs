//! Cube and capture files: JSON sidecar plus raw binary payload.
//!
//! Cubes: band-sequential float32 little-endian (each band row-major),
//! followed by one byte per pixel of mask when `mask_present`. Captures:
//! channel-sequential float64 little-endian — they carry noisy signals
//! whose reconstruction math is sensitive to rounding, so they keep full
//! precision. The capture sidecar embeds the system response and exposure
//! times needed to invert it.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cube::HsiCube;
use crate::error::{CoreError, Result};
use crate::grid::WavelengthGrid;
use crate::io::grid_from_wavelengths;
use crate::sim::MultiCamCapture;
use crate::system::SystemResponse;

/// Optional provenance fields carried by sidecar files.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FileMeta {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct CubeSidecar {
    height: usize,
    width: usize,
    bands: usize,
    wavelengths_nm: Vec<f64>,
    layout: String,
    dtype: String,
    mask_present: bool,
    payload: String,
    #[serde(flatten)]
    meta: FileMeta,
}

fn payload_path(json_path: &Path) -> PathBuf {
    json_path.with_extension("bin")
}

fn write_sidecar<T: Serialize>(path: &Path, sidecar: &T) -> Result<()> {
    let body =
        serde_json::to_string_pretty(sidecar).map_err(|e| CoreError::invalid(e.to_string()))?;
    std::fs::write(path, body + "\n").map_err(|e| CoreError::io(path.display().to_string(), e))
}

fn read_sidecar<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| CoreError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })
}

/// Write a cube as `<path>` sidecar plus `<path with .bin>` payload.
pub fn write_cube(json_path: impl AsRef<Path>, cube: &HsiCube, meta: &FileMeta) -> Result<()> {
    let json_path = json_path.as_ref();
    let bin_path = payload_path(json_path);
    let pixels = cube.pixel_count();
    let bands = cube.bands();

    let mut payload = Vec::with_capacity(pixels * bands * 4 + if cube.mask().is_some() { pixels } else { 0 });
    // pixel-major in memory -> band-sequential on disk
    for b in 0..bands {
        for p in 0..pixels {
            payload.extend_from_slice(&(cube.pixel(p)[b] as f32).to_le_bytes());
        }
    }
    if let Some(mask) = cube.mask() {
        payload.extend(mask.iter().map(|&m| u8::from(m)));
    }
    std::fs::write(&bin_path, &payload)
        .map_err(|e| CoreError::io(bin_path.display().to_string(), e))?;

    let sidecar = CubeSidecar {
        height: cube.height(),
        width: cube.width(),
        bands,
        wavelengths_nm: cube.grid().wavelengths().collect(),
        layout: "band-sequential".to_string(),
        dtype: "float32-little-endian".to_string(),
        mask_present: cube.mask().is_some(),
        payload: bin_path
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string(),
        meta: meta.clone(),
    };
    write_sidecar(json_path, &sidecar)
}

/// Read a cube written by [`write_cube`].
pub fn read_cube(json_path: impl AsRef<Path>) -> Result<HsiCube> {
    let json_path = json_path.as_ref();
    let sidecar: CubeSidecar = read_sidecar(json_path)?;
    if sidecar.layout != "band-sequential" {
        return Err(CoreError::invalid(format!(
            "unsupported cube layout '{}'",
            sidecar.layout
        )));
    }
    if sidecar.dtype != "float32-little-endian" {
        return Err(CoreError::invalid(format!(
            "unsupported cube dtype '{}'",
            sidecar.dtype
        )));
    }
    if sidecar.wavelengths_nm.len() != sidecar.bands {
        return Err(CoreError::invalid(format!(
            "sidecar lists {} wavelengths for {} bands",
            sidecar.wavelengths_nm.len(),
            sidecar.bands
        )));
    }
    let grid = grid_from_wavelengths(&sidecar.wavelengths_nm, &json_path.display().to_string())?;
    let bin_path = json_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&sidecar.payload);
    let payload =
        std::fs::read(&bin_path).map_err(|e| CoreError::io(bin_path.display().to_string(), e))?;

    let pixels = sidecar.height * sidecar.width;
    let data_bytes = pixels * sidecar.bands * 4;
    let mask_bytes = if sidecar.mask_present { pixels } else { 0 };
    if payload.len() != data_bytes + mask_bytes {
        return Err(CoreError::invalid(format!(
            "cube payload has {} bytes, expected {}",
            payload.len(),
            data_bytes + mask_bytes
        )));
    }
    let mut data = vec![0.0f64; pixels * sidecar.bands];
    for (i, chunk) in payload[..data_bytes].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64;
        let b = i / pixels;
        let p = i % pixels;
        data[p * sidecar.bands + b] = v;
    }
    let mask = if sidecar.mask_present {
        Some(payload[data_bytes..].iter().map(|&b| b != 0).collect())
    } else {
        None
    };
    HsiCube::new(sidecar.height, sidecar.width, grid, data, mask)
}

#[derive(Serialize, Deserialize)]
struct CaptureSidecar {
    height: usize,
    width: usize,
    channels: usize,
    camera_count: usize,
    t_per_camera: Vec<f64>,
    seed: u64,
    grid: WavelengthGrid,
    /// Row-major 3k x n system response.
    system_matrix: Vec<f64>,
    layout: String,
    dtype: String,
    payload: String,
    #[serde(flatten)]
    meta: FileMeta,
}

/// Write a capture as `<path>` sidecar plus `<path with .bin>` payload.
pub fn write_capture(
    json_path: impl AsRef<Path>,
    capture: &MultiCamCapture,
    meta: &FileMeta,
) -> Result<()> {
    let json_path = json_path.as_ref();
    let bin_path = payload_path(json_path);
    let pixels = capture.pixel_count();
    let channels = capture.channels();

    let mut payload = Vec::with_capacity(pixels * channels * 8);
    // pixel-major in memory -> channel-sequential on disk
    for ch in 0..channels {
        for p in 0..pixels {
            payload.extend_from_slice(&capture.pixel(p)[ch].to_le_bytes());
        }
    }
    std::fs::write(&bin_path, &payload)
        .map_err(|e| CoreError::io(bin_path.display().to_string(), e))?;

    let sr = capture.system();
    let mut system_matrix = Vec::with_capacity(channels * sr.grid().count());
    for row in 0..sr.matrix().nrows() {
        for col in 0..sr.matrix().ncols() {
            system_matrix.push(sr.matrix()[(row, col)]);
        }
    }
    // the sidecar's own `seed` field records the capture seed; drop the
    // meta copy so the flattened JSON has no duplicate key
    let meta = FileMeta {
        config_digest: meta.config_digest.clone(),
        seed: None,
    };
    let sidecar = CaptureSidecar {
        height: capture.height(),
        width: capture.width(),
        channels,
        camera_count: sr.camera_count(),
        t_per_camera: capture.t_per_camera().to_vec(),
        seed: capture.seed(),
        grid: *sr.grid(),
        system_matrix,
        layout: "channel-sequential".to_string(),
        dtype: "float64-little-endian".to_string(),
        payload: bin_path
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string(),
        meta,
    };
    write_sidecar(json_path, &sidecar)
}

/// Read a capture written by [`write_capture`].
pub fn read_capture(json_path: impl AsRef<Path>) -> Result<MultiCamCapture> {
    let json_path = json_path.as_ref();
    let sidecar: CaptureSidecar = read_sidecar(json_path)?;
    if sidecar.layout != "channel-sequential" || sidecar.dtype != "float64-little-endian" {
        return Err(CoreError::invalid(format!(
            "unsupported capture encoding '{}'/'{}'",
            sidecar.layout, sidecar.dtype
        )));
    }
    if sidecar.channels != 3 * sidecar.camera_count {
        return Err(CoreError::invalid(format!(
            "capture sidecar: {} channels for {} cameras",
            sidecar.channels, sidecar.camera_count
        )));
    }
    let n = sidecar.grid.count();
    if sidecar.system_matrix.len() != sidecar.channels * n {
        return Err(CoreError::invalid(
            "capture sidecar: system matrix size mismatch".to_string(),
        ));
    }
    let matrix = DMatrix::from_row_slice(sidecar.channels, n, &sidecar.system_matrix);
    let system = SystemResponse::from_parts(sidecar.grid, matrix, sidecar.camera_count)?;

    let bin_path = json_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&sidecar.payload);
    let payload =
        std::fs::read(&bin_path).map_err(|e| CoreError::io(bin_path.display().to_string(), e))?;
    let pixels = sidecar.height * sidecar.width;
    if payload.len() != pixels * sidecar.channels * 8 {
        return Err(CoreError::invalid(format!(
            "capture payload has {} bytes, expected {}",
            payload.len(),
            pixels * sidecar.channels * 8
        )));
    }
    let mut data = vec![0.0f64; pixels * sidecar.channels];
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        let ch = i / pixels;
        let p = i % pixels;
        data[p * sidecar.channels + ch] = v;
    }
    MultiCamCapture::from_parts(
        sidecar.height,
        sidecar.width,
        system,
        sidecar.t_per_camera,
        sidecar.seed,
        data,
    )
}
