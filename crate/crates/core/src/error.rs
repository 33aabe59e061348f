use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("length mismatch: expected {expected} samples, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solver diverged: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Codec(#[from] CodecError),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid config: {0}")]
    Config(String),
}

/// Failures inside a codec.
#[derive(Debug, Error)]
pub enum CodecError {
    #[error("qp {0} outside [0, 51]")]
    QpOutOfRange(i32),

    #[error("image {width}x{height} too small for the reference codec (minimum 8x8)")]
    ImageTooSmall { width: usize, height: usize },

    #[error("image {width}x{height} exceeds 65535 in one dimension")]
    ImageTooLarge { width: usize, height: usize },

    #[error("malformed bitstream: {0}")]
    Malformed(String),

    #[error("external codec command `{command}` failed: {message}")]
    External { command: String, message: String },

    #[error("external codec is not configured: {0}")]
    NotConfigured(String),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
