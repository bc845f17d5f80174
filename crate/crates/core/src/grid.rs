//! Uniform wavelength grids.
//!
//! Every spectral quantity in this crate lives on a [`WavelengthGrid`]: a
//! uniformly spaced axis `start + i * step` for `i in 0..count`, in
//! nanometres. Operations that combine spectral data require identical grids
//! and fail loudly otherwise; [`crate::spectrum::resample_values`] moves data
//! between grids.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct WavelengthGrid {
    start_nm: f64,
    step_nm: f64,
    count: usize,
}

#[derive(Deserialize)]
struct RawGrid {
    start_nm: f64,
    step_nm: f64,
    count: usize,
}

impl TryFrom<RawGrid> for WavelengthGrid {
    type Error = CoreError;

    fn try_from(raw: RawGrid) -> Result<Self> {
        WavelengthGrid::new(raw.start_nm, raw.step_nm, raw.count)
    }
}

impl WavelengthGrid {
    pub fn new(start_nm: f64, step_nm: f64, count: usize) -> Result<Self> {
        if !start_nm.is_finite() || !step_nm.is_finite() {
            return Err(CoreError::invalid("grid bounds must be finite"));
        }
        if step_nm <= 0.0 {
            return Err(CoreError::invalid(format!(
                "grid step must be positive, got {step_nm} nm"
            )));
        }
        if count < 2 {
            return Err(CoreError::invalid(format!(
                "grid needs at least 2 bands, got {count}"
            )));
        }
        Ok(Self {
            start_nm,
            step_nm,
            count,
        })
    }

    pub fn start_nm(&self) -> f64 {
        self.start_nm
    }

    pub fn step_nm(&self) -> f64 {
        self.step_nm
    }

    /// Number of bands (`n`).
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn end_nm(&self) -> f64 {
        self.wavelength(self.count - 1)
    }

    pub fn wavelength(&self, index: usize) -> f64 {
        self.start_nm + index as f64 * self.step_nm
    }

    pub fn wavelengths(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.wavelength(i))
    }

    /// Fractional band position of a wavelength on this grid.
    pub fn position(&self, wavelength_nm: f64) -> f64 {
        (wavelength_nm - self.start_nm) / self.step_nm
    }

    /// Whether `other`'s range lies inside this grid's range, with a small
    /// float slack so that equal endpoints computed two ways still count.
    pub fn covers(&self, other: &WavelengthGrid) -> bool {
        let eps = 1e-9 * self.step_nm.max(1.0);
        other.start_nm >= self.start_nm - eps && other.end_nm() <= self.end_nm() + eps
    }
}

impl std::fmt::Display for WavelengthGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}-{} nm step {} nm ({} bands)",
            self.start_nm,
            self.end_nm(),
            self.step_nm,
            self.count
        )
    }
}

/// Error helper for operations requiring identical grids.
pub fn ensure_same_grid(left: &WavelengthGrid, right: &WavelengthGrid) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(CoreError::GridMismatch {
            left: *left,
            right: *right,
        })
    }
}
