use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("face {face} references vertex {index} but the mesh has {vertex_count} vertices")]
    FaceIndexOutOfRange {
        face: usize,
        index: usize,
        vertex_count: usize,
    },

    #[error("mesh has zero surface area")]
    ZeroArea,

    #[error("face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },

    #[error("mesh is disconnected: vertex {unreachable} lies in a component of {component_size} vertices not reachable from vertex {source_vertex}")]
    Disconnected {
        source_vertex: usize,
        unreachable: usize,
        component_size: usize,
    },

    #[error("vertex index {index} out of range for {len} vertices")]
    VertexOutOfRange { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("size cap exceeded: {what} needs {requested}, cap is {cap}")]
    SizeCap {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("sparse factorisation failed: {0}")]
    Factorization(String),

    #[error("eigensolver did not converge: max residual {max_residual:e} after subspace dimension {subspace_dim}")]
    EigenNotConverged {
        residuals: Vec<f64>,
        max_residual: f64,
        subspace_dim: usize,
    },

    #[error("singular functional-map row system at row {row}")]
    SingularRowSystem { row: usize },

    #[error("{count} zero eigenvalues; the mesh is probably disconnected")]
    RepeatedZeroEigenvalue { count: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("optimisation diverged at iteration {iteration}: {term} is not finite")]
    Diverged {
        iteration: usize,
        term: String,
        trace: Vec<f64>,
    },

    #[error("cache error: {0}")]
    Cache(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable kind, used in the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::FaceIndexOutOfRange { .. } => "face_index_out_of_range",
            Error::ZeroArea => "zero_area",
            Error::DegenerateFace { .. } => "degenerate_face",
            Error::Disconnected { .. } => "disconnected",
            Error::VertexOutOfRange { .. } => "vertex_out_of_range",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::SizeCap { .. } => "size_cap",
            Error::Factorization(_) => "factorization",
            Error::EigenNotConverged { .. } => "eigen_not_converged",
            Error::SingularRowSystem { .. } => "singular_row_system",
            Error::RepeatedZeroEigenvalue { .. } => "repeated_zero_eigenvalue",
            Error::NonFinite(_) => "non_finite",
            Error::Diverged { .. } => "diverged",
            Error::Cache(_) => "cache",
            Error::Json(_) => "json",
        }
    }
}
