//! Spectra and filter transmittances on wavelength grids.

use crate::error::{CoreError, Result};
use crate::grid::WavelengthGrid;

/// Nonnegative radiance spectrum, photometrically normalized. Units are
/// arbitrary but must be consistent across a pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct RadianceSpectrum {
    grid: WavelengthGrid,
    values: Vec<f64>,
}

impl RadianceSpectrum {
    pub fn new(grid: WavelengthGrid, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(CoreError::invalid(format!(
                    "radiance must be finite and nonnegative, got {v} at band {i}"
                )));
            }
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Piecewise-linear resampling onto `target`, clamped at zero.
    pub fn resample(&self, target: &WavelengthGrid) -> Result<Self> {
        let mut vals = resample_values(&self.grid, &self.values, target)?;
        for v in &mut vals {
            *v = v.max(0.0);
        }
        RadianceSpectrum::new(*target, vals)
    }
}

/// Filter transmittance: per-band fraction of light passed, in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTransmittance {
    grid: WavelengthGrid,
    values: Vec<f64>,
}

impl FilterTransmittance {
    pub fn new(grid: WavelengthGrid, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 || *v > 1.0 {
                return Err(CoreError::invalid(format!(
                    "transmittance must lie in [0, 1], got {v} at band {i}"
                )));
            }
        }
        Ok(Self { grid, values })
    }

    /// The unit filter (an unfiltered camera).
    pub fn all_pass(grid: WavelengthGrid) -> Self {
        Self {
            values: vec![1.0; grid.count()],
            grid,
        }
    }

    /// The annihilating filter, useful as a degenerate reference.
    pub fn all_block(grid: WavelengthGrid) -> Self {
        Self {
            values: vec![0.0; grid.count()],
            grid,
        }
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Piecewise-linear resampling onto `target`, clamped to [0, 1].
    pub fn resample(&self, target: &WavelengthGrid) -> Result<Self> {
        let mut vals = resample_values(&self.grid, &self.values, target)?;
        for v in &mut vals {
            *v = v.clamp(0.0, 1.0);
        }
        FilterTransmittance::new(*target, vals)
    }
}

fn check_len(grid: &WavelengthGrid, len: usize) -> Result<()> {
    if len != grid.count() {
        return Err(CoreError::invalid(format!(
            "value vector has {len} entries but grid has {} bands",
            grid.count()
        )));
    }
    Ok(())
}

/// Piecewise-linear interpolation of `values` (on `source`) at the
/// wavelengths of `target`. The target range must lie inside the source
/// range. Linear data is reproduced exactly; resampling onto the source
/// grid itself is the identity.
pub fn resample_values(
    source: &WavelengthGrid,
    values: &[f64],
    target: &WavelengthGrid,
) -> Result<Vec<f64>> {
    check_len(source, values.len())?;
    if source == target {
        return Ok(values.to_vec());
    }
    if !source.covers(target) {
        return Err(CoreError::invalid(format!(
            "target grid {target} extends beyond source grid {source}"
        )));
    }
    let n = source.count();
    let out = target
        .wavelengths()
        .map(|wl| {
            let pos = source.position(wl).clamp(0.0, (n - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = pos - lo as f64;
            values[lo] * (1.0 - frac) + values[hi] * frac
        })
        .collect();
    Ok(out)
}

/// Elementwise product of two grid-aligned value vectors.
pub(crate) fn elementwise_product(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}
