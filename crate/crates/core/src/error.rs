use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid order {order}: {reason}")]
    InvalidOrder { order: usize, reason: &'static str },

    #[error("coherent state with x = {x} truncated at n_max = {n_max}: tail mass {tail:.3e}")]
    Truncation { x: f64, n_max: usize, tail: f64 },

    #[error("moment matrix is singular (condition estimate {condition:.3e})")]
    SingularMomentMatrix { condition: f64 },

    #[error("power series has a vanishing linear term ({a1:.3e})")]
    ZeroLinearTerm { a1: f64 },

    #[error("CSM denominator vanishes (b = {denominator:.3e})")]
    VanishingDenominator { denominator: f64 },

    #[error("no local minimum found from any start")]
    NoMinimumFound,

    #[error("no physical stationary point: {0}")]
    NoPhysicalSolution(String),

    #[error("physical branch could not be continued between g = {g_lo} and g = {g_hi}")]
    BranchGap { g_lo: f64, g_hi: f64 },

    #[error("spectrum not converged at n_max = {n_max} (residual {residual:.3e})")]
    NotConverged { n_max: usize, residual: f64 },

    #[error("parity of level {level} is ambiguous (<P> = {expectation:.6})")]
    AmbiguousParity { level: usize, expectation: f64 },
}
