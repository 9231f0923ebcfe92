use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bit address out of range: element {flat_index} bit {bit_pos} (tensor has {len} elements)")]
    Address {
        flat_index: usize,
        bit_pos: u8,
        len: usize,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("comparison error: {0}")]
    Comparison(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to load `{name}`: {reason}")]
    Load { name: String, reason: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {}: {reason}", path.display())]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    /// Stable, machine-readable category used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Address { .. } => "addressing",
            Error::Shape(_) => "shape",
            Error::Comparison(_) => "comparison",
            Error::Config(_) => "config",
            Error::Load { .. } => "load",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn load(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Load {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
