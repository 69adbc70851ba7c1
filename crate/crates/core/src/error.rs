use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("cannot lift from level {from} down to level {to}")]
    LevelDowncast { from: u32, to: u32 },

    #[error("invalid test-set family: {0}")]
    InvalidFamily(String),

    #[error("test-set family exceeds cap of {cap} members")]
    FamilyTooLarge { cap: usize },

    #[error("kernel kind incompatible with point realization: {0}")]
    KindMismatch(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("sample budget must be at least 1, got {0}")]
    InvalidBudget(i64),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("not a variation of finite volume: net volume change {net:e} exceeds tolerance {tol:e}")]
    NotAVariation { net: f64, tol: f64 },

    #[error("weight solver stalled after {iterations} iterations (KKT residual {residual:e})")]
    SolverStall { iterations: usize, residual: f64 },

    #[error("degenerate solution: support empty after weight floor")]
    DegenerateSolution,

    #[error("construction failed: only {successes} level(s) solved")]
    ConstructionFailed { successes: usize },

    #[error("self-adjointness residual {residual:e} exceeds tolerance {tol:e}")]
    NotSelfAdjoint { residual: f64, tol: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
