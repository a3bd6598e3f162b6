use thiserror::Error;

use crate::scene::Issue;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("scene invariant violated: {}", summarize_issues(.0))]
    Invariant(Vec<Issue>),

    #[error("trace endpoints coincide (|tx - rx| = {distance:e} m)")]
    DegenerateEndpoints { distance: f64 },

    #[error("scene has no RIS")]
    RisAbsent,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("map grids differ: {0}")]
    GridMismatch(String),

    #[error("malformed map file: {0}")]
    MapFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, used by the CLI and the HTTP service.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "SYNTAX",
            Error::Schema { .. } => "SCHEMA",
            Error::Invariant(_) => "INVARIANT",
            Error::DegenerateEndpoints { .. } => "DEGENERATE_ENDPOINTS",
            Error::RisAbsent => "RIS_ABSENT",
            Error::DimensionMismatch(_) => "DIMENSION_MISMATCH",
            Error::IndexOutOfRange { .. } => "INDEX_OUT_OF_RANGE",
            Error::GridMismatch(_) => "GRID_MISMATCH",
            Error::MapFormat(_) => "MAP_FORMAT",
            Error::Io(_) => "IO",
        }
    }
}

fn summarize_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| format!("{} ({})", i.code.as_str(), i.message))
        .collect::<Vec<_>>()
        .join("; ")
}
