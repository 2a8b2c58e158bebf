use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("basis index {index} outside -{m}..={m}")]
    BasisIndex { index: i64, m: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("weight function is not admissible: {0}")]
    Inadmissible(String),

    #[error("root bracketing failed for mode {mode}")]
    Bracketing { mode: usize },

    #[error("rank {rank} outside 1..={max}")]
    Rank { rank: usize, max: usize },

    #[error("oracle failure on basis column {column}: {source}")]
    Oracle {
        column: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("singular or indefinite system: {0}")]
    Singular(String),

    #[error("model file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
