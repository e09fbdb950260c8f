use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("coefficient degeneracy: |alpha(r)| = {value:.3e} below margin at r = {r:.6e}")]
    Degenerate { r: f64, value: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("modulus not admissible: {0}")]
    Inadmissible(String),

    #[error(
        "fixed-point iteration diverged at step {step} (ratio {ratio:.3}); shrink the coefficient perturbation"
    )]
    Divergence { step: usize, ratio: f64 },

    #[error("ill-posed fit: {0}")]
    IllPosed(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
