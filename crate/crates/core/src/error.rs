use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("{function}: argument {value} outside its domain {domain}")]
    Domain {
        function: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown diffusivity kind `{0}`")]
    UnknownDiffusivity(String),

    #[error("matrix is singular to working precision at column {column}")]
    Singular { column: usize },

    #[error("Newton iterate left the admissible interval ({lower}, {upper}) at node {node}")]
    Guard { node: usize, lower: f64, upper: f64 },

    #[error(
        "Newton did not converge after {iterations} iterations (residual {residual:.3e}); \
         try a smaller time step"
    )]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} runs failed")]
    RunsFailed { failed: usize, total: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed field dump: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Strips `AtStep` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 config, 3 solver, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Io { .. } | Error::Parse { .. } => 4,
            Error::Config(_)
            | Error::InvalidParameter { .. }
            | Error::UnknownDiffusivity(_)
            | Error::InvalidMesh(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
