use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("subsystem index {index} out of range for {count} subsystems")]
    SiteOutOfRange { index: usize, count: usize },

    #[error("occupation {occupation} out of range at site {site} (dim {dim})")]
    OccupationOutOfRange { site: usize, occupation: usize, dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration failed at t = {time} us: {reason}")]
    IntegrationFailure { time: f64, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("svm error: {0}")]
    Svm(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("required file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
