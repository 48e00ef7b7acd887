use thiserror::Error;

#[derive(Debug, Error)]
pub enum PatError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("under-resolved: {0}")]
    UnderResolved(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("periodic wrap-around: {0}")]
    WrapAround(String),
    #[error("point off sphere: {0}")]
    OffSphere(String),
    #[error("quadrature order too low: {0}")]
    QuadratureOrder(String),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("artifact mismatch: {0}")]
    ArtifactMismatch(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, PatError>;
