use thiserror::Error;

/// Errors raised by the core routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("block matrix is not symmetric at ({row}, {col})")]
    AsymmetricB { row: usize, col: usize },
    #[error("block matrix entry ({row}, {col}) = {value} is outside (0, 1)")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    /// `index` is `None` when the entries are individually valid but do not sum to one.
    #[error("assignment probabilities are not a simplex (index {index:?}, value {value})")]
    PiNotSimplex { index: Option<usize>, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("need at least {required} vertices, got {n}")]
    TooFewVertices { n: usize, required: usize },
    #[error("cannot draw {count} pairs from a pool of {pool}")]
    CountExceedsPool { count: usize, pool: usize },
    #[error("embedding dimension {d} must be in [1, {n})")]
    DimensionTooLarge { d: usize, n: usize },
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("need at least {required} values, got {found}")]
    TooFewValues { required: usize, found: usize },
    #[error("eigensolver did not converge: residual {residual:e} after {restarts} restarts")]
    EigenNotConverged { residual: f64, restarts: usize },
    #[error("need more than {required} points for this mixture range, got {n}")]
    TooFewPoints { n: usize, required: usize },
    #[error("covariance of component {component} is singular after regularization")]
    SingularCovariance { component: usize },
    #[error("label vectors differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("second-moment matrix of the latent positions is singular")]
    SingularDelta,
    #[error("limiting covariance for blocks ({k}, {l}) is not positive definite")]
    SingularSigma { k: usize, l: usize },
    #[error("p1 = {p1} exceeds the over-sampling bound {bound}")]
    OverSampling { p1: f64, bound: f64 },
    #[error("a single block has no pair to separate")]
    NoBlockPairs,
    #[error("Chernoff-active pair after initial sampling is not unique")]
    NonUniqueActivePairAtZero,
    #[error("requested {requested} pairs but only {available} are unobserved")]
    BudgetExceeded { requested: usize, available: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
