//! Error type shared by the whole crate.

use crate::grid::WavelengthGrid;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("wavelength grid mismatch: {left} vs {right}")]
    GridMismatch {
        left: WavelengthGrid,
        right: WavelengthGrid,
    },

    #[error("{0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Every prior spectrum got zero posterior mass for an observed signal.
    /// Usually means the noise parameters are inconsistent with the data.
    #[error("no explanatory spectrum: posterior mass vanished over the whole prior")]
    NoExplanatorySpectrum,

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    /// Callers exposing exit codes map these to a distinct status.
    pub fn is_numerical(&self) -> bool {
        matches!(self, CoreError::NoExplanatorySpectrum)
    }
}
