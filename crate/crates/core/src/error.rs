use thiserror::Error;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: max |A - A^dagger| = {violation:e}")]
    NotHermitian { violation: f64 },
    #[error("matrix is not positive semidefinite: min eigenvalue = {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("trace is not one: |Tr - 1| = {deviation:e}")]
    TraceNotOne { deviation: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("mixing weight {0} outside [0, 1]")]
    LambdaOutOfRange(f64),
    #[error("inner product has imaginary part {0:e}")]
    NonRealResult(f64),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("phase spaces differ")]
    SpaceMismatch,
    #[error("invalid phase space: {0}")]
    InvalidSpace(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("raw isometry matrix has column rank below {needed}")]
    RankDeficientInput { needed: usize },
    #[error("Kraus operators are not trace preserving: max |sum K^dagger K - I| = {violation:e}")]
    NotTracePreserving { violation: f64 },
    #[error("integration failed: {0}")]
    IntegrationFailure(String),
    #[error("evaluation failed: {0}")]
    EvaluationFailure(String),
    #[error("objective and state belong to different regimes")]
    RegimeMismatch,
    #[error("state has eigenvalue {min_eigenvalue:e} below the entropy floor")]
    SingularState { min_eigenvalue: f64 },
    #[error("point is not critical: gradient norm {gradient_norm:e}")]
    NotCritical { gradient_norm: f64 },
    #[error("endpoints are not on the same level set: |J0 - J1| = {gap:e}")]
    NotSameLevel { gap: f64 },
    #[error("level-set paths require a type-one objective")]
    NotLinearObjective,
}
