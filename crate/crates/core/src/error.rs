use thiserror::Error;

/// Crate-wide error type. Everything fallible in the library funnels into
/// this enum so callers (the CLI in particular) can report one coherent
/// message per failure.
#[derive(Debug, Error)]
pub enum Error {
    /// A ratings file could not be parsed. `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Programmatic dataset construction received bad data.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A parameter is outside its documented domain.
    #[error("invalid parameter `{name}`: {msg}")]
    InvalidParam { name: &'static str, msg: String },

    /// Objects that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A ridge system could not be factorized (zero regularization on a
    /// rank-deficient normal matrix).
    #[error("singular normal equations while solving for {side} {index}")]
    SingularSystem { side: &'static str, index: usize },

    /// A user or item index is outside the model.
    #[error("{kind} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        limit: usize,
    },

    /// Cosine distance against a zero vector is undefined. The item index is
    /// attached when the vector came from an item column.
    #[error("cosine distance undefined for a zero vector")]
    ZeroVector { item: Option<usize> },

    /// Exhaustive normalizer enumeration would exceed its subset budget.
    #[error(
        "exhaustive normalizer over {items} items choose {k} needs {subsets} \
         subsets, over budget {budget}"
    )]
    BudgetExceeded {
        items: usize,
        k: usize,
        subsets: u128,
        budget: u64,
    },

    /// An operation that needs data got an empty collection.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A recommendation list's length does not match the normalizer's k.
    #[error("list length {list_len} does not match normalizer k={k}")]
    KMismatch { list_len: usize, k: usize },

    /// A serialized model file is malformed.
    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
