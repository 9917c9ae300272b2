use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("depth map needs at least 2 bins, got {0}")]
    TooFewDepthBins(usize),

    #[error("depth row {row} is not on the simplex (sum {sum})")]
    NotSimplex { row: usize, sum: f64 },

    #[error("item index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("item {0} listed more than once")]
    DuplicateItem(usize),

    #[error("item {0} is already selected")]
    AlreadySelected(usize),

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("selection size k must be at least 1")]
    ZeroK,

    #[error("brute force enumeration is capped at {cap} candidates, got {got}")]
    TooManyCandidates { got: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance matrix is not positive definite")]
    SingularCovariance,

    #[error("no boxes available to fit geometry models")]
    NoBoxes,

    #[error("no annotated objects")]
    NoAnnotatedObjects,

    #[error("unlabeled set is empty")]
    EmptyUnlabeled,

    #[error("requested {requested} items but only {available} unlabeled")]
    NotEnoughCandidates { requested: usize, available: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("pool failed validation with {0} violation(s)")]
    Validation(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
