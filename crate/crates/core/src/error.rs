use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed system: {0}")]
    MalformedSystem(String),

    #[error("closed loop is unstable, pole moduli {moduli:?}")]
    Unstable { moduli: Vec<f64> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("signal length mismatch: expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("singular normal matrix: {0}")]
    Singular(String),

    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("atanh domain violated at sample {sample}: |F(theta) r| = {value} >= phi = {phi}")]
    Domain { sample: usize, value: f64, phi: f64 },

    #[error("insufficient excitation: {0}")]
    Excitation(String),

    #[error("optimizer returned an infeasible point: {0}")]
    Infeasible(String),

    #[error("cost evaluated to {value} at {point:?}")]
    NonFiniteCost { point: Vec<f64>, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
