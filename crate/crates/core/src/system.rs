//! Camera sensitivities and the stacked multi-camera system response.
//!
//! A camera is a 3xn spectral sensitivity matrix (rows in R, G, B order).
//! Mounting a filter multiplies each row elementwise by the transmittance;
//! stacking k filtered cameras vertically yields the 3k x n system response
//! that maps a radiance spectrum to the full channel vector.

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};
use crate::grid::{ensure_same_grid, WavelengthGrid};
use crate::spectrum::{resample_values, FilterTransmittance, RadianceSpectrum};

/// Spectral sensitivity functions of one camera: a 3xn matrix, one row per
/// color channel in R, G, B order.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraSSF {
    grid: WavelengthGrid,
    rows: DMatrix<f64>,
}

impl CameraSSF {
    pub fn new(grid: WavelengthGrid, rows: DMatrix<f64>) -> Result<Self> {
        if rows.nrows() != 3 || rows.ncols() != grid.count() {
            return Err(CoreError::invalid(format!(
                "SSF must be 3x{} for grid {grid}, got {}x{}",
                grid.count(),
                rows.nrows(),
                rows.ncols()
            )));
        }
        for v in rows.iter() {
            if !v.is_finite() || *v < 0.0 {
                return Err(CoreError::invalid(format!(
                    "SSF entries must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(Self { grid, rows })
    }

    pub fn from_channel_values(
        grid: WavelengthGrid,
        r: &[f64],
        g: &[f64],
        b: &[f64],
    ) -> Result<Self> {
        let n = grid.count();
        if r.len() != n || g.len() != n || b.len() != n {
            return Err(CoreError::invalid(
                "SSF channel vectors must all match the grid length".to_string(),
            ));
        }
        let mut rows = DMatrix::zeros(3, n);
        for (ch, vals) in [r, g, b].into_iter().enumerate() {
            for (j, v) in vals.iter().enumerate() {
                rows[(ch, j)] = *v;
            }
        }
        CameraSSF::new(grid, rows)
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    /// One channel's sensitivity curve.
    pub fn channel(&self, ch: usize) -> Vec<f64> {
        self.rows.row(ch).iter().copied().collect()
    }

    /// Resample every channel onto `target` (piecewise linear, clamped at 0).
    pub fn resample(&self, target: &WavelengthGrid) -> Result<Self> {
        let mut out = DMatrix::zeros(3, target.count());
        for ch in 0..3 {
            let row: Vec<f64> = self.rows.row(ch).iter().copied().collect();
            let vals = resample_values(&self.grid, &row, target)?;
            for (j, v) in vals.iter().enumerate() {
                out[(ch, j)] = v.max(0.0);
            }
        }
        CameraSSF::new(*target, out)
    }
}

/// Stacked response of k filtered cameras: a 3k x n matrix. Row blocks
/// follow the camera order given at construction; rows within a block are
/// R, G, B.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemResponse {
    grid: WavelengthGrid,
    matrix: DMatrix<f64>,
    camera_count: usize,
}

impl SystemResponse {
    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn camera_count(&self) -> usize {
        self.camera_count
    }

    /// Total channel count, `3 * camera_count`.
    pub fn channel_count(&self) -> usize {
        3 * self.camera_count
    }

    /// The 3xn block of rows belonging to camera `index`.
    pub fn camera_block(&self, index: usize) -> DMatrix<f64> {
        self.matrix.rows(3 * index, 3).into_owned()
    }

    /// Reassemble from raw parts; used by file readers.
    pub fn from_parts(grid: WavelengthGrid, matrix: DMatrix<f64>, camera_count: usize) -> Result<Self> {
        if matrix.nrows() != 3 * camera_count || matrix.ncols() != grid.count() {
            return Err(CoreError::invalid(format!(
                "system response must be {}x{}, got {}x{}",
                3 * camera_count,
                grid.count(),
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        for v in matrix.iter() {
            if !v.is_finite() || *v < 0.0 {
                return Err(CoreError::invalid(
                    "system response entries must be finite and nonnegative".to_string(),
                ));
            }
        }
        Ok(Self {
            grid,
            matrix,
            camera_count,
        })
    }

    /// Noiseless projection of raw per-band values through the system.
    /// No grid bookkeeping; callers guarantee `values.len() == n`.
    pub(crate) fn project_values(&self, values: &[f64]) -> Vec<f64> {
        let m = &self.matrix;
        let mut out = vec![0.0; m.nrows()];
        for (row, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (col, v) in values.iter().enumerate() {
                acc += m[(row, col)] * v;
            }
            *slot = acc;
        }
        out
    }
}

/// Channel readings of the stacked cameras, photometrically normalized.
/// Values may be negative once noise is added.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraSignal {
    values: Vec<f64>,
}

impl CameraSignal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(CoreError::EmptyInput("camera signal"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("camera signal must be finite".to_string()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-camera response with a filter mounted: each SSF row multiplied
/// elementwise by the transmittance.
pub fn effective_response(ssf: &CameraSSF, filter: &FilterTransmittance) -> Result<CameraSSF> {
    ensure_same_grid(ssf.grid(), filter.grid())?;
    let mut rows = ssf.rows.clone();
    for ch in 0..3 {
        for (j, t) in filter.values().iter().enumerate() {
            rows[(ch, j)] *= t;
        }
    }
    CameraSSF::new(ssf.grid, rows)
}

/// Stack filtered cameras into the full system response. Cameras appear in
/// input order; channels within a camera stay in R, G, B order.
pub fn stack_system(cameras: &[(&CameraSSF, &FilterTransmittance)]) -> Result<SystemResponse> {
    if cameras.is_empty() {
        return Err(CoreError::EmptyInput("camera list"));
    }
    let grid = *cameras[0].0.grid();
    let n = grid.count();
    let k = cameras.len();
    let mut matrix = DMatrix::zeros(3 * k, n);
    for (i, (ssf, filter)) in cameras.iter().enumerate() {
        ensure_same_grid(&grid, ssf.grid())?;
        let eff = effective_response(ssf, filter)?;
        for ch in 0..3 {
            for j in 0..n {
                matrix[(3 * i + ch, j)] = eff.rows[(ch, j)];
            }
        }
    }
    Ok(SystemResponse {
        grid,
        matrix,
        camera_count: k,
    })
}

/// Noiseless signal of the stacked system for a radiance spectrum.
pub fn apply_system(sr: &SystemResponse, r: &RadianceSpectrum) -> Result<CameraSignal> {
    ensure_same_grid(sr.grid(), r.grid())?;
    CameraSignal::new(sr.project_values(r.values()))
}
