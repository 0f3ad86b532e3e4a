use thiserror::Error;

#[derive(Debug, Error)]
pub enum NldpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("spectral aliasing: {fraction:.3e} of the power sits above the guard band at {location}")]
    Aliasing { fraction: f64, location: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl NldpError {
    /// Whether the failure came from user input rather than the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            NldpError::InvalidArgument(_) | NldpError::Config(_) | NldpError::Format(_) | NldpError::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, NldpError>;

pub(crate) fn invalid(msg: impl Into<String>) -> NldpError {
    NldpError::InvalidArgument(msg.into())
}
