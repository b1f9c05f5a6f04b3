use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("chain is not ergodic: {0}")]
    Ergodicity(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("metric `{metric}` is not defined for {family}")]
    Metric { metric: String, family: String },

    #[error(
        "data not dominated by the prior: all {atoms} atoms have zero likelihood \
         (first forbidden observation index per atom: {first_forbidden:?})"
    )]
    DominationFailure {
        atoms: usize,
        /// `(atom index, first observation index that killed it)` for the
        /// first few atoms.
        first_forbidden: Vec<(usize, Option<usize>)>,
    },

    #[error("region has zero prior mass: {0}")]
    EmptyRegion(String),

    #[error("sample space too large for exact enumeration: {size} > {limit}; use Monte Carlo evaluation")]
    Enumeration { size: u128, limit: u128 },

    #[error("exact computation infeasible: {0}")]
    Infeasible(String),

    #[error("numerical accuracy not reached: {0}")]
    Accuracy(String),

    #[error("covering failed: {0}")]
    Cover(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid rate: {0}")]
    Rate(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
