use thiserror::Error;

use crate::measure::DensityFailure;

/// Errors raised by the computational modules.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid ground set: {0}")]
    InvalidGroundSet(String),

    #[error("basis vector {index} is linearly dependent on the preceding ones")]
    LinearlyDependent { index: usize },

    #[error("functional is inconsistent on dependent generator {index} (given {given}, implied {implied})")]
    InconsistentFunctional {
        index: usize,
        given: f64,
        implied: f64,
    },

    #[error("vector is not in the functional's domain (residual {residual:e})")]
    NotInDomain { residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("LP solver failed: {0}")]
    LpFailure(String),

    #[error("LP is unbounded")]
    LpUnbounded,

    #[error("LP is infeasible: {0}")]
    LpInfeasible(&'static str),

    #[error("empty admissible interval [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },

    #[error("target {index} is already in the span of the domain")]
    TargetInDomain { index: usize },

    #[error("target {index} does not lie in W_C of the current domain")]
    TargetNotInWc { index: usize },

    #[error("hull target {index} is not dominated by any element of the subspace")]
    HullMembershipFailed { index: usize },

    #[error("functional is negative on block {block} (value {value:e})")]
    NegativeMass { block: usize, value: f64 },

    #[error("function is not constant on the blocks of the sigma-algebra")]
    IntegralOfNonMeasurable,

    #[error("value range violated: {0}")]
    RangeViolation(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("subspace B does not contain the constant functions")]
    ConstantsMissing,

    #[error("density hypothesis violated (max distance {:e})", .0.max_distance())]
    DensityFailed(Box<DensityFailure>),

    #[error("polynomial degree {degree} exceeds available moment degree {max}")]
    DegreeTooHigh { degree: usize, max: usize },

    #[error("invalid moment sequence: {0}")]
    InvalidMoments(String),

    #[error("eigensolver did not converge after {sweeps} sweeps")]
    EigFailure { sweeps: usize },

    #[error("Hankel matrix is not positive semidefinite (pivot {index} = {pivot:e})")]
    NotPsd { index: usize, pivot: f64 },

    #[error("numerical rank is ambiguous (pivot {index} = {pivot:e} lies in the ambiguity band)")]
    RankDetectionAmbiguous { index: usize, pivot: f64 },

    #[error("search bracket exhausted after {expansions} expansions")]
    BracketExhausted { expansions: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
