use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("space kind mismatch: {left} vs {right}")]
    KindMismatch { left: String, right: String },

    #[error("invalid group element: {0}")]
    InvalidGroupElement(String),

    #[error("normalization calibration failed for {kind}: relative deviation {deviation:.3e} at cross-check point")]
    Calibration { kind: String, deviation: f64 },

    #[error("urn truncation needs K_max >= {required}, configured cap is {cap}")]
    Truncation { required: u64, cap: u64 },

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
