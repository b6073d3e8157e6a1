use thiserror::Error;

use crate::market::AgentId;

pub type Result<T, E = PemError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PemError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("key mismatch: ciphertext under key {found:#018x}, expected {expected:#018x}")]
    KeyMismatch { expected: u64, found: u64 },

    #[error("fixed-point encoding error: {0}")]
    Encoding(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    /// A blinded aggregate or comparator input does not fit the configured width.
    #[error("sizing error: {0}")]
    Sizing(String),

    #[error("precision error: {0}")]
    Precision(String),

    #[error("degenerate market: {0}")]
    DegenerateMarket(String),

    #[error("routing error: unknown agent {0}")]
    Routing(AgentId),

    #[error("garbled circuit output did not decode")]
    Decode,

    #[error("wire format error: {0}")]
    Wire(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for PemError {
    fn from(e: std::io::Error) -> Self {
        PemError::Io(e.to_string())
    }
}

impl From<csv::Error> for PemError {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        match e.kind() {
            csv::ErrorKind::Io(_) => PemError::Io(e.to_string()),
            _ => PemError::Parse {
                line,
                msg: e.to_string(),
            },
        }
    }
}
