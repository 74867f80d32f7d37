use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("root {root} is not coprime with sequence length {length}")]
    InvalidRoot { root: i64, length: usize },

    #[error("shape mismatch: expected {expected}, got {found}")]
    Shape { expected: String, found: String },

    #[error("time {t} s outside [0, {duration}] s")]
    OutOfRange { t: f64, duration: f64 },

    #[error("no signal: correlation peak {peak:.3e} below detection threshold {threshold:.3e}")]
    NoSignal { peak: f64, threshold: f64 },

    #[error("record too short: need {needed} samples, have {available}")]
    Length { needed: usize, available: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{count} tapers requested but NW = {nw} only supports {max} well-concentrated tapers")]
    Concentration { count: usize, nw: f64, max: usize },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
