use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid must have at least one step")]
    EmptyGrid,

    #[error("derivative has {got} cells but the grid has {expected} steps")]
    LengthMismatch { expected: usize, got: usize },

    #[error("time {s} is not a knot of the grid with {n_steps} steps; refine the grid")]
    SNotOnGrid { s: f64, n_steps: usize },

    #[error("time {0} lies outside [0, 1]")]
    TimeOutOfRange(f64),

    #[error("vectors live on different grids ({left} vs {right} steps)")]
    GridMismatch { left: usize, right: usize },

    #[error("grid with {target} steps is not a refinement of {source_steps} steps")]
    NotARefinement { source_steps: usize, target: usize },

    #[error("constraint set is empty")]
    NoConstraints,

    #[error("{constraints} constraints but {levels} levels")]
    LevelCountMismatch { constraints: usize, levels: usize },

    #[error("constraints are linearly dependent: smallest Gram eigenvalue {smallest:e} (largest {largest:e})")]
    SingularGram { smallest: f64, largest: f64 },

    #[error("times must satisfy 0 < T_1 < ... < T_m <= 1")]
    TimesNotIncreasing,

    #[error("conditioning time must be positive")]
    BadT,

    #[error("Hermite degree {0} exceeds the supported maximum of 60")]
    DegreeTooLarge(usize),

    #[error("variance parameter must be nonnegative, got {0}")]
    NegativeVarianceParameter(f64),

    #[error("u^2 = {u2} is smaller than var(X) = {var_x}")]
    VarianceOrder { u2: f64, var_x: f64 },

    #[error("computed variance {0:e} is negative beyond rounding tolerance")]
    NumericalInconsistency(f64),

    #[error("covariance has eigenvalue {eigenvalue:e} below -1e-9 * {largest:e}")]
    IndefiniteCovariance { eigenvalue: f64, largest: f64 },

    #[error("unknown functional kind `{0}`")]
    UnknownFunctional(String),

    #[error("product functional needs at least one factor")]
    EmptyProduct,

    #[error("terms of a kernel combination have different degrees")]
    DegreeMismatch,

    #[error("vector is not in L0 (residual {0:e})")]
    NotInL0(f64),

    #[error("Fock elements are built over different bases or truncation orders")]
    BaseMismatch,

    #[error("Fock base vectors are not orthonormal (max Gram deviation {0:e})")]
    BaseNotOrthonormal(f64),

    #[error("truncated Fock space too large: {reason}")]
    FockTooLarge { reason: String },

    #[error("sample count must be positive")]
    NoSamples,

    #[error("invalid input: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
