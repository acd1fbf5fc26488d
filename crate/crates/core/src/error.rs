use std::fmt;

use crate::kernels::BuildDiagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid device filter: {0}")]
    InvalidFilter(String),

    #[error("no device matches filter {filter}; candidates: {candidates}")]
    NoMatchingDevice { filter: String, candidates: String },

    #[error("data set contains no arrays")]
    EmptyData,

    #[error("layout size overflow")]
    Overflow,

    #[error("malformed layout header: {0}")]
    MalformedHeader(String),

    #[error("device allocation of {requested} bytes failed ({available} bytes free)")]
    AllocationFailure { requested: u64, available: u64 },

    #[error("unknown data handle {0}")]
    UnknownHandle(String),

    #[error("device error in kernel `{kernel}`: {message}")]
    DeviceError { kernel: String, message: String },

    #[error("{}", CompileLog(.0))]
    CompileError(Vec<BuildDiagnostic>),

    #[error("kernel `{name}` defined by both `{first_unit}` and `{second_unit}`")]
    DuplicateKernel {
        name: String,
        first_unit: String,
        second_unit: String,
    },

    #[error("backend `{backend}` cannot compile source unit `{unit}`")]
    UnsupportedSource { backend: String, unit: String },

    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unsupported element type: {0}")]
    UnsupportedElementType(String),

    #[error("process already initialized")]
    AlreadyInitialized,

    #[error("process not initialized")]
    NotInitialized,

    #[error("stage {index}: {source}")]
    Stage {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed file: {0}")]
    MalformedFile(String),

    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),

    #[error("size mismatch: expected {expected} bytes, found {found}")]
    SizeMismatch { expected: u64, found: u64 },

    #[error("malformed sidecar: {0}")]
    MalformedSidecar(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct CompileLog<'a>(&'a [BuildDiagnostic]);

impl fmt::Display for CompileLog<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "kernel build failed")?;
        for diag in self.0 {
            write!(f, "\n--- build log for `{}` ---\n{}", diag.unit_name, diag.log.trim_end())?;
        }
        Ok(())
    }
}
