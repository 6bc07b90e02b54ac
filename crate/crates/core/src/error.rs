use std::fmt;
use std::path::PathBuf;

/// Where in an input a format error was detected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Position {
    Byte(u64),
    Line(usize),
    Key(String),
    Unknown,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Byte(o) => write!(f, "byte offset {o}"),
            Position::Line(l) => write!(f, "line {l}"),
            Position::Key(k) => write!(f, "key `{k}`"),
            Position::Unknown => f.write_str("unknown position"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("format error at {position}: {message}")]
    Format { position: Position, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("database version mismatch: found {found}, expected {expected}")]
    Version { found: u32, expected: u32 },

    #[error("checksum mismatch for {0}")]
    Checksum(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error class, used by front ends to map errors to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration, unknown lookups, invalid arguments.
    Validation,
    /// Unreadable or malformed files.
    Io,
}

impl Error {
    pub fn format(position: Position, message: impl Into<String>) -> Self {
        Error::Format {
            position,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Lookup(_) | Error::Validation(_) | Error::Config(_) | Error::Usage(_) | Error::Calibration(_) => {
                ErrorClass::Validation
            }
            Error::Format { .. } | Error::Version { .. } | Error::Checksum(_) | Error::Io { .. } => ErrorClass::Io,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
