use thiserror::Error;

/// Errors produced by the solver pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-positive rate: {0}")]
    NonPositiveRate(String),
    #[error("bad routing weights: {0}")]
    BadRoutingWeights(String),
    #[error("unknown phase ({server};{d2},{d3})")]
    UnknownPhase { server: u8, d2: i8, d3: i8 },
    #[error("phase index {0} out of range")]
    PhaseIndexOutOfRange(usize),
    #[error("attended queue {0} is empty")]
    EmptyAttendedQueue(usize),
    #[error("linear system is singular: {0}")]
    SingularSystem(&'static str),
    #[error("f(lambda) does not change sign over [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("system is unstable (drift {drift} >= 0)")]
    Unstable { drift: f64 },
    #[error("no convergence after {iterations} iterations (last change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },
    #[error("A1 is singular")]
    SingularA1,
    #[error("R residual {residual:e} exceeds bound")]
    ResidualTooLarge { residual: f64 },
    #[error("boundary system is singular")]
    SingularBoundarySystem,
    #[error("negative probability {value:e} at index {index}")]
    NegativeProbability { index: usize, value: f64 },
    #[error("phase is not a level-0 phase")]
    PhaseNotAtLevelZero,
    #[error("expected 2 roots of |A(z)| in (-1,1), found {found} at {roots:?}")]
    RootCountMismatch { found: usize, roots: Vec<f64> },
    #[error("boundary null space is degenerate (singular values {0:?})")]
    DegenerateNullSpace([f64; 3]),
    #[error("negative boundary probability {0:e}")]
    NegativeBoundaryProb(f64),
    #[error("A(z) is nearly singular at z = {0}")]
    NearSingularAz(f64),
    #[error("effective arrival rate to queue {0} is zero")]
    ZeroEffectiveRate(usize),
    #[error("all mean queue lengths are zero")]
    AllZeroMeans,
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("state outside the phase set: l={l:?}, server={server}")]
    StateOutsidePhaseSet { l: [u64; 3], server: usize },
    #[error("fixture error: {0}")]
    Fixture(String),
}

pub type Result<T> = std::result::Result<T, Error>;
