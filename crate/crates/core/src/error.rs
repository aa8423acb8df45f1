use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("count row has no positive entry")]
    ZeroRow,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("number of multinomial trials must be at least 1")]
    InvalidTrials,

    #[error("weight scenario has {frequencies} frequencies for {atoms} population atoms")]
    ScenarioMismatch { frequencies: usize, atoms: usize },

    #[error("transport marginals carry different mass: {source_mass} vs {target_mass}")]
    MassMismatch { source_mass: f64, target_mass: f64 },

    #[error("assignment oracle supports at most {max} atoms, got {got}")]
    TooLarge { got: usize, max: usize },

    #[error("cost matrix of {rows}x{cols} exceeds the {limit} entry limit{}", context.map(|(m, n)| format!(" (m={m}, n={n})")).unwrap_or_default())]
    SizeLimit {
        rows: usize,
        cols: usize,
        limit: usize,
        context: Option<(u64, usize)>,
    },

    #[error("network simplex failed: {0}")]
    Solver(String),

    #[error("convexity bound violated: W_p^p = {transport} > paired cost {paired}")]
    ConvexityViolation { transport: f64, paired: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("matrix is empty after preprocessing")]
    EmptyMatrix,

    #[error("not enough usable points for a fit: {0}")]
    InsufficientData(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
