//! Hyperspectral cubes and plain RGB images.
//!
//! Cubes are stored pixel-major in memory (`n` contiguous bands per pixel),
//! which is what the per-pixel reconstruction loops want. The on-disk
//! format is band-sequential; the readers/writers in [`crate::io`] convert.

use crate::error::{CoreError, Result};
use crate::grid::WavelengthGrid;

/// An h x w x n radiance image with wavelength metadata and an optional
/// per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    height: usize,
    width: usize,
    grid: WavelengthGrid,
    data: Vec<f64>,
    mask: Option<Vec<bool>>,
}

impl HsiCube {
    pub fn new(
        height: usize,
        width: usize,
        grid: WavelengthGrid,
        data: Vec<f64>,
        mask: Option<Vec<bool>>,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(CoreError::invalid("cube dimensions must be positive".to_string()));
        }
        let n = grid.count();
        if data.len() != height * width * n {
            return Err(CoreError::invalid(format!(
                "cube data has {} values, expected {}x{}x{} = {}",
                data.len(),
                height,
                width,
                n,
                height * width * n
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::invalid(
                "cube values must be finite and nonnegative".to_string(),
            ));
        }
        if let Some(m) = &mask {
            if m.len() != height * width {
                return Err(CoreError::invalid(format!(
                    "mask has {} entries, expected {}",
                    m.len(),
                    height * width
                )));
            }
        }
        Ok(Self {
            height,
            width,
            grid,
            data,
            mask,
        })
    }

    /// Build a cube by evaluating `f(row, col)` for every pixel.
    pub fn from_fn(
        height: usize,
        width: usize,
        grid: WavelengthGrid,
        mut f: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        let n = grid.count();
        let mut data = Vec::with_capacity(height * width * n);
        for r in 0..height {
            for c in 0..width {
                let px = f(r, c);
                if px.len() != n {
                    return Err(CoreError::invalid(format!(
                        "pixel ({r}, {c}) has {} bands, expected {n}",
                        px.len()
                    )));
                }
                data.extend_from_slice(&px);
            }
        }
        HsiCube::new(height, width, grid, data, None)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn bands(&self) -> usize {
        self.grid.count()
    }

    /// Pixel-major raw data: pixel `p` occupies `data[p*n .. (p+1)*n]`.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn with_mask(mut self, mask: Option<Vec<bool>>) -> Result<Self> {
        if let Some(m) = &mask {
            if m.len() != self.pixel_count() {
                return Err(CoreError::invalid(format!(
                    "mask has {} entries, expected {}",
                    m.len(),
                    self.pixel_count()
                )));
            }
        }
        self.mask = mask;
        Ok(self)
    }

    /// Spectrum of pixel `index` (row-major pixel order).
    pub fn pixel(&self, index: usize) -> &[f64] {
        let n = self.bands();
        &self.data[index * n..(index + 1) * n]
    }

    pub fn pixel_rc(&self, row: usize, col: usize) -> &[f64] {
        self.pixel(row * self.width + col)
    }

    pub fn is_valid(&self, index: usize) -> bool {
        self.mask.as_ref().map_or(true, |m| m[index])
    }

    pub fn valid_pixels(&self) -> usize {
        match &self.mask {
            Some(m) => m.iter().filter(|v| **v).count(),
            None => self.pixel_count(),
        }
    }

    /// Mean over every value in the cube; the scene-brightness proxy.
    pub fn mean_value(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Maximum value, used as the default PSNR peak.
    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// A 3-channel image, pixel-major (R, G, B per pixel).
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(CoreError::invalid("image dimensions must be positive".to_string()));
        }
        if data.len() != height * width * 3 {
            return Err(CoreError::invalid(format!(
                "image data has {} values, expected {}",
                data.len(),
                height * width * 3
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("image values must be finite".to_string()));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, index: usize) -> &[f64] {
        &self.data[index * 3..(index + 1) * 3]
    }
}
