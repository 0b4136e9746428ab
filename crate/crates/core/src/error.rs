use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A state violates its invariants (positivity, Heisenberg bound, ...).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The adaptive integrator could not meet its tolerance.
    #[error("integrator failed at tau = {tau:.6e} after {steps} steps (step size {step:.3e}): {reason}")]
    Integrator {
        tau: f64,
        steps: usize,
        step: f64,
        reason: String,
    },

    /// Population leaked into the top of a truncated Fock space.
    #[error("truncation leakage {leakage:.3e} at tau = {tau:.6e} exceeds {limit:.1e} for dim = {dim}; increase the dimension")]
    Truncation {
        dim: usize,
        tau: f64,
        leakage: f64,
        limit: f64,
    },

    /// The configuration is valid physics but not supported by this operation.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// A coupled two-particle configuration has a non-positive shifted frequency.
    #[error("unstable configuration: shifted frequency squared {omega_sq:.6e} rad^2/s^2 is not positive")]
    Unstable { omega_sq: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidState(msg.into())
    }

    /// True for errors produced by numerical machinery (integrator, truncation).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Integrator { .. } | Error::Truncation { .. })
    }
}
