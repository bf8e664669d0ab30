use alloc::string::String;

/// Errors raised by the estimators and numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The tail exponent is outside `1 <= alpha < d/2`.
    #[error("regime violation: requires 1 <= alpha < d/2 (got alpha = {alpha}, d = {dim})")]
    RegimeViolation { alpha: f64, dim: usize },

    #[error("walk in dimension {0} is recurrent; a transient walk (d >= 3) is required")]
    RecurrentWalk(usize),

    #[error("MGF diverges: |lambda| = {lambda} must stay below c_alpha = {c_alpha} when alpha = 1")]
    MgfDiverges { lambda: f64, c_alpha: f64 },

    #[error("target-unreachable: no tilt below {lambda_max} reaches target {target}")]
    TargetUnreachable { target: f64, lambda_max: f64 },

    #[error("no admissible level count: chi window [{lo}, {hi}] cannot be met (n too small)")]
    NoAdmissibleLevels { lo: f64, hi: f64 },

    #[error("lower bound undefined: P(H0 <= n/k) vanishes for n = {n}, k = {k}")]
    EmptyReturnWindow { n: u64, k: u64 },

    #[error("grid spacing mismatch: {0} vs {1}")]
    SpacingMismatch(f64, f64),

    #[error("grid method supports at most 32 coefficients, got {0}")]
    TooManyCoefficients(usize),

    #[error("quadrature did not reach tolerance (estimate {value}, error {error})")]
    Quadrature { value: f64, error: f64 },

    #[error("probability {0} is degenerate (must lie strictly between 0 and 1)")]
    DegenerateProbability(f64),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
