use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("evaluation too close to a pole (|den| = {modulus:.3e})")]
    NearPoleEvaluation { modulus: f64 },

    #[error("function has a pole of order {} on the component", -order)]
    PoleOnComponent { order: i64 },

    #[error("connection is not branched for the given frame: {reason}")]
    NotBranched { reason: String },

    #[error("unsupported divisor component: {reason}")]
    UnsupportedComponent { reason: String },

    #[error("trajectory approached the divisor at parameter {parameter:.6}")]
    PoleApproach { parameter: f64, last_state: Vec<Complex64> },

    #[error("step size underflow at parameter {parameter:.6} (h = {step:.3e})")]
    StepUnderflow { parameter: f64, step: f64 },

    #[error("frame degenerated at parameter {parameter:.6} (|det g| = {det:.3e})")]
    SingularFrame { parameter: f64, det: f64 },

    #[error("degenerate transversal loop: {0}")]
    DegenerateTransversal(String),

    #[error("quotient by the distinguished direction is ill-defined (invariance defect {defect:.3e})")]
    QuotientIllDefined { defect: f64 },

    #[error("degenerate geodesic: zero initial velocity")]
    DegenerateGeodesic,

    #[error("obstruction ranks did not stabilize within {iterations} iterations")]
    NoStabilization { iterations: usize },

    #[error("subspace is not invariant under transport (defect {defect:.3e})")]
    NotInvariant { defect: f64 },

    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Validation(_) | Error::NotBranched { .. } | Error::UnsupportedComponent { .. } => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}
