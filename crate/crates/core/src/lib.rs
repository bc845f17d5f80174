//! Design and evaluation toolkit for multi-camera spectral imaging.
//!
//! A smartphone-class device with k cameras, each optionally behind an
//! external spectral filter, observes a scene through a stacked 3k x n
//! system response. This crate provides the pieces needed to design and
//! evaluate such a system end to end:
//!
//! - [`grid`], [`spectrum`], [`system`]: wavelength grids, spectra,
//!   filters, sensitivity matrices and the stacked system response;
//! - [`noise`]: the heteroscedastic sensor-noise law, its least-squares
//!   parameter fit, and the auto-exposure brightness model;
//! - [`prior`]: building a discrete radiance prior from a hyperspectral
//!   corpus (subsampling, illuminant conversion, k-means compression);
//! - [`uncertainty`]: Bayes posterior over the prior, the expected
//!   conditional variance criterion `v(F)`, Monte Carlo estimation and
//!   exhaustive filter-pair search;
//! - [`calib`]: SSF estimation from LED flat fields, the device
//!   calibration divisor, and color projection fitting;
//! - [`cube`], [`sim`], [`metrics`]: hyperspectral cubes, simulated
//!   multi-camera captures, posterior-mean reconstruction, and the
//!   PSNR / SAM / NSE metrics;
//! - [`io`]: the CSV / JSON / binary file formats;
//! - [`rng`]: keyed counter-based randomness making every pipeline stage
//!   deterministic and schedule-independent.

pub mod calib;
pub mod cube;
pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod noise;
pub mod prior;
pub mod rng;
pub mod sim;
pub mod spectrum;
pub mod system;
pub mod uncertainty;

pub use cube::{HsiCube, RgbImage};
pub use error::{CoreError, Result};
pub use grid::WavelengthGrid;
pub use noise::{ExposureCurve, NoiseParams};
pub use prior::SpectraPrior;
pub use spectrum::{FilterTransmittance, RadianceSpectrum};
pub use system::{CameraSSF, CameraSignal, SystemResponse};
pub use uncertainty::{FilterLibrary, UncertaintyReport};
