use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("window is empty or covers every cell")]
    DegenerateDomain,
    #[error("s must lie strictly inside (0, 1), got {0}")]
    InvalidExponent(f64),
    #[error("intervals must satisfy a < b <= c < d, got ({a}, {b}, {c}, {d})")]
    InvalidInterval { a: f64, b: f64, c: f64, d: f64 },
    #[error("radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("bitmasks overlap")]
    NotDisjoint,
    #[error("grid specifications do not match")]
    SpecMismatch,
    #[error("inner window is not contained in the outer window")]
    NotNested,
    #[error("sequence must be positive and decreasing (index {0})")]
    InvalidSequence(usize),
    #[error("mollifier radius {eps} is below the cell size {h}")]
    EpsilonBelowResolution { eps: f64, h: f64 },
    #[error("schedule is not monotone in the required direction")]
    InvalidSchedule,
    #[error("brute force over {0} free cells exceeds the oracle limit")]
    OracleTooLarge(usize),
    #[error(
        "solver did not reach tolerance in {iterations} iterations (best energy {best_energy})"
    )]
    ConvergenceFailure {
        iterations: usize,
        best_energy: f64,
        best: Vec<f64>,
    },
    #[error("vertical window too short: need half-height {needed}, have {available}")]
    WindowTooShort { needed: f64, available: f64 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("confinement undetermined: the set reaches the vertical edge of the window")]
    ConfinementUndetermined,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
