use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid slope vector: {0}")]
    InvalidSlope(&'static str),
    #[error("boundary value missing at site ({0}, {1})")]
    IncompleteBoundary(i64, i64),
    #[error("invalid parameters: {0}")]
    InvalidParameters(&'static str),
    #[error("incompatible configurations: {0}")]
    IncompatibleConfigurations(&'static str),
    #[error("site ({0}, {1}) is not updatable")]
    NotUpdatable(i64, i64),
    #[error("empty support: {0}")]
    EmptySupport(&'static str),
    #[error("invalid range: lo={lo} > hi={hi}")]
    InvalidRange { lo: i64, hi: i64 },
    #[error("coupling order violated at event {event}")]
    CouplingViolation { event: u64 },
    #[error("iteration cap reached after {0} doublings")]
    IterationCap(u32),
    #[error("undefined estimate: {0}")]
    UndefinedEstimate(&'static str),
    #[error("state space too large: {size} > cap {cap}")]
    TooLarge { size: u128, cap: u128 },
    #[error("generator is reducible")]
    Reducible,
    #[error("generator is not reversible (residual {0:e})")]
    NotReversible(f64),
    #[error("eigensolver did not converge (residual {0:e})")]
    NoConvergence(f64),
    #[error("invalid height u={0}: must be positive")]
    InvalidHeight(f64),
    #[error("point outside the cap base")]
    OutsideBase,
    #[error("unsupported fluctuation exponent {0}")]
    UnsupportedExponent(f64),
    #[error("trajectory has no checkpoint for index {0}")]
    IncompleteTrajectory(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
