use thiserror::Error;

/// Errors raised by the model, analysis and estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A required configuration value is absent or inconsistent.
    #[error("configuration error: {field}: {message}")]
    Config { field: &'static str, message: String },

    /// A parameter lies outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A probability vector or density does not carry unit mass.
    #[error("input is not normalized (deviation {deviation:.3e})")]
    NotNormalized { deviation: f64 },

    /// The transverse-mode grid truncates the wave packet.
    #[error("mode grid too coarse: edge-to-peak intensity ratio {edge_ratio:.3e} exceeds 1e-10")]
    Resolution { edge_ratio: f64 },

    /// Quadrature did not meet its tolerance within the subdivision budget.
    #[error("quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    /// The data or model carry no information about the deflection.
    #[error("deflection is not identifiable: {0}")]
    NonIdentifiable(String),

    /// Least-squares fitting failed from every starting point.
    #[error("pattern fit did not converge from any start (best rms residual {best_residual:.3e})")]
    FitFailed { best_residual: f64 },

    /// An operation received no data.
    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl Error {
    /// True for errors caused by user-supplied configuration rather than
    /// by a numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Domain(_) | Error::NotNormalized { .. } | Error::Empty(_)
        )
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
