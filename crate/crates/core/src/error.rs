use thiserror::Error;

/// Errors raised by the numeric modules.
///
/// Magnitudes are reported as `f64` regardless of the scalar type in use.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    MaxStepsExceeded { t: f64, max_steps: usize },
    #[error("tolerance {0} outside [1e-14, 1e-2]")]
    InvalidTolerance(f64),
    #[error("time {t} outside trajectory span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("inverse identity defect {defect:.3e} exceeds 1e-6")]
    IdentityDefect { defect: f64 },
    #[error("quadrature did not reach tolerance on [{a}, {b}] (estimate {estimate:.3e})")]
    QuadratureFailure { a: f64, b: f64, estimate: f64 },
    #[error("map vanishes on the boundary (margin {margin:.3e})")]
    ZeroOnBoundary { margin: f64 },
    #[error("winding refinement exhausted near parameter {theta}")]
    RefinementExhausted { theta: f64 },
    #[error("linear part has no purely imaginary eigenvalue pair: {0}")]
    SpectrumMismatch(String),
    #[error("newton iteration failed after {iterations} iterations (residual {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("monodromy has an eigenvalue within {distance:.3e} of 1")]
    SingularJacobian { distance: f64 },
    #[error("singular linear system")]
    SingularMatrix,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
