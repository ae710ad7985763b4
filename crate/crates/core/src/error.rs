use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("steady state is not unique or the bordered system is singular: {0}")]
    NonUniqueSteadyState(String),

    #[error("singular resolvent while evaluating correlation integrals")]
    SingularResolvent,

    #[error("coefficient table solve failed at g = {g:.4e} rad/s, stark = {stark:.4e} rad/s, s = {saturation:.3e}: {source}")]
    TableSolve {
        g: f64,
        stark: f64,
        saturation: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("stability guard violated at t = {t:.6e} s: friction rate * dt = {value:.3e} (limit 0.1)")]
    StabilityGuard { t: f64, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no dominant peak in the count histogram")]
    NoDominantPeak,

    #[error("bin {bin} is saturated: every sequence recorded an event, inversion undefined")]
    SaturatedBin { bin: usize },

    #[error("fit did not converge after {iterations} iterations (chi-square {chi_square:.4e})")]
    FitNotConverged { iterations: usize, chi_square: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require(cond: bool, field: &'static str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter { field, reason: reason.into() })
    }
}
