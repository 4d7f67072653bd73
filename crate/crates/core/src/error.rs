use std::path::PathBuf;

use thiserror::Error;

/// Where inside an instance file a bad value was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntryLocation {
    pub matrix: usize,
    pub row: usize,
    pub col: usize,
}

impl std::fmt::Display for EntryLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "matrix {} row {} col {}", self.matrix, self.row, self.col)
    }
}

/// Problems detected while reading an instance file.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric at {at}: {value} vs {mirrored}")]
    Asymmetric {
        at: EntryLocation,
        value: f64,
        mirrored: f64,
    },

    #[error("non-finite entry at {0}")]
    NonFinite(EntryLocation),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigensolver did not converge for a {dim}x{dim} matrix within {max_iterations} iterations")]
    EigenConvergence { dim: usize, max_iterations: usize },

    #[error(
        "projection did not converge after {iterations} iterations \
         (primal residual {primal_residual:.3e}, dual residual {dual_residual:.3e}, tolerance {tolerance:.3e})"
    )]
    ProjectionConvergence {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
        tolerance: f64,
    },

    #[error(
        "partial coloring failed after {restarts} restarts: best frozen fraction {best_fraction:.4}, \
         needed {required_fraction:.4}"
    )]
    PartialColoringFailure {
        restarts: usize,
        best_fraction: f64,
        required_fraction: f64,
    },

    #[error("refusing exhaustive search over n = {n} (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("failed to parse instance: {0}")]
    Parse(#[from] ParseError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
