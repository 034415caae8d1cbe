//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the data pipeline, the models, and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// Command-line misuse: unknown values, out-of-range flags.
    #[error("usage error: {0}")]
    Usage(String),

    /// An operation was called with an invalid parameter value.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Tensor or layer shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Non-finite values or other numeric contract violations.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A sequence exceeds a model's fixed capacity.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A dataset-level problem: empty sets, too few groups.
    #[error("data error: {0}")]
    Data(String),

    /// Input file does not match the expected column schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A cell or record could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// Labels outside {0, 1} or a single-class set where two are required.
    #[error("label error: {0}")]
    Label(String),

    /// Contradictory data within one logical record (e.g. winner changes mid-round).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// A fold/window configuration that cannot cover the sheets.
    #[error("configuration error: {0}")]
    Config(String),

    /// A checkpoint or report file is malformed.
    #[error("format error: {0}")]
    Format(String),

    /// A metric is undefined for the given inputs.
    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    /// A caller violated an API contract (e.g. mismatched forward/backward cache).
    #[error("contract error: {0}")]
    Contract(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let msg = e.to_string();
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => Error::Parse(msg),
        }
    }
}

impl Error {
    /// Process exit code for the CLI: 0 success, 1 usage, 2 data/schema,
    /// 3 numeric/integrity.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Parameter(_) => 1,
            Error::Data(_)
            | Error::Schema(_)
            | Error::Parse(_)
            | Error::Label(_)
            | Error::Format(_)
            | Error::MetricUndefined(_)
            | Error::Io(_) => 2,
            Error::Dimension(_)
            | Error::Numeric(_)
            | Error::Capacity(_)
            | Error::Integrity(_)
            | Error::Config(_)
            | Error::Contract(_) => 3,
        }
    }
}
