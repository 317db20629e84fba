use std::path::PathBuf;

/// Failures while decoding one of the interchange formats.
///
/// Every variant carries a stable code (see [`FormatError::code`]) so that
/// callers and scripts can tell failure modes apart without string matching.
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown dtype flag {0}")]
    UnknownDtype(u8),
    #[error("unknown modality flag {0}")]
    UnknownModality(u8),
    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("sidecar {path}: {message}")]
    Sidecar { path: PathBuf, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("self-loop on voxel {0}")]
    SelfLoop(usize),
    #[error("edge ({0},{1}) references a voxel outside 0..{2}")]
    EdgeOutOfRange(usize, usize, usize),
    #[error("duplicate edge ({0},{1})")]
    DuplicateEdge(usize, usize),
    #[error("unknown ROI label {0:?}")]
    UnknownLabel(String),
}

impl FormatError {
    pub fn code(&self) -> &'static str {
        match self {
            FormatError::BadMagic { .. } => "bad-magic",
            FormatError::UnsupportedVersion(_) => "unsupported-version",
            FormatError::UnknownDtype(_) => "unknown-dtype",
            FormatError::UnknownModality(_) => "unknown-modality",
            FormatError::Truncated { .. } => "truncated",
            FormatError::DimensionMismatch(_) => "dimension-mismatch",
            FormatError::NonFinite { .. } => "non-finite",
            FormatError::Sidecar { .. } => "sidecar",
            FormatError::Parse { .. } => "parse",
            FormatError::SelfLoop(_) => "self-loop",
            FormatError::EdgeOutOfRange(..) => "edge-out-of-range",
            FormatError::DuplicateEdge(..) => "duplicate-edge",
            FormatError::UnknownLabel(_) => "unknown-label",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    /// Bad parameters (empty delay list, malformed λ grid, ...).
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Inputs that load fine but do not fit together or violate a contract.
    #[error("invalid data: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, source: FormatError) -> Self {
        Error::Format {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code: 2 config error, 3 data error, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Format { .. } | Error::Data(_) => 3,
            Error::Numeric(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }

    /// The innermost format error, if any.
    pub fn format_error(&self) -> Option<&FormatError> {
        match self {
            Error::Format { source, .. } => Some(source),
            Error::Stage { source, .. } => source.format_error(),
            _ => None,
        }
    }
}
