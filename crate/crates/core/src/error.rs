use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("unsupported dimension N = {0}; only N = 3 and N = 4 are implemented")]
    UnsupportedDimension(usize),

    #[error("kernel index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point outside the domain: {0}")]
    OutsideDomain(String),

    #[error("singular coupling block for group {0}")]
    SingularBlock(usize),

    #[error("no positive solution: {0}")]
    NoPositiveSolution(String),

    #[error("spectral analysis is only defined for N = 4 (got N = {0})")]
    SpectrumUnsupported(usize),

    #[error("point outside the admissible box: {0}")]
    OutsideBox(String),

    #[error("critical point d = {d} of peak {peak} escapes ({lower}, {upper})")]
    CriticalPointEscapes {
        peak: usize,
        d: f64,
        lower: f64,
        upper: f64,
    },

    #[error("degenerate annulus: inner radius {inner} >= outer radius {outer}")]
    DegenerateAnnulus { inner: f64, outer: f64 },

    #[error("scaling-law hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("quadrature did not converge on [{lower}, {upper}] (error estimate {error:e})")]
    Quadrature { lower: f64, upper: f64, error: f64 },

    #[error("Newton did not converge after {iterations} iterations (last residual {residual:e})")]
    NewtonDiverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("Newton converged to the trivial branch u = 0")]
    TrivialBranch,

    #[error("sweep aborted at epsilon = {epsilon} after {completed} solves: {reason}")]
    SweepAborted {
        epsilon: f64,
        completed: usize,
        reason: Box<LabError>,
    },
}

pub type Result<T> = std::result::Result<T, LabError>;
