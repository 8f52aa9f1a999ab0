use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: wrong shape, NaN entries, empty station sets.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("covariance matrix is not positive definite: leading minor {minor} is {value:e}")]
    NotPositiveDefinite { minor: usize, value: f64 },

    #[error("no sign change found for |x| <= {limit:e} ({context})")]
    BracketExplosion { limit: f64, context: String },

    #[error("root solver stalled with residual {residual:e} ({context})")]
    RootNotConverged { residual: f64, context: String },

    #[error("no dwell time observed with station {station} empty")]
    EmptyConditioning { station: usize },

    #[error("no regulator increase observed on face {station}")]
    ZeroRegulator { station: usize },

    #[error("LCP reflection did not converge after {sweeps} sweeps (residual {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numeric failures, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Singular(_)
                | Error::NotPositiveDefinite { .. }
                | Error::BracketExplosion { .. }
                | Error::RootNotConverged { .. }
                | Error::EmptyConditioning { .. }
                | Error::ZeroRegulator { .. }
                | Error::NonConvergence { .. }
        )
    }
}
