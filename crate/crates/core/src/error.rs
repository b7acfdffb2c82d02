use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The Fock cutoff discards more coherent-state weight than allowed.
    #[error("truncation too small for |beta| = {beta}: dim {dim} leaves tail mass {tail:e} (need dim >= {required})")]
    Truncation {
        beta: f64,
        dim: usize,
        tail: f64,
        required: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// A runtime invariant of an integration run broke by more than ten times its tolerance.
    #[error("integration diverged at t = {time}: {detail}")]
    IntegrationDiverged { time: f64, detail: String },

    #[error("step size too large at t = {time}: {detail}")]
    StepSize { time: f64, detail: String },

    #[error("generator sign error at t = {time}: top-level trace grew by {growth:e}")]
    GeneratorSign { time: f64, growth: f64 },

    #[error("invalid transition: {0}")]
    InvalidTransition(String),

    #[error("runaway trajectory (seed {seed}): {detections} detection(s) by t = {time}")]
    RunawayTrajectory { seed: u64, detections: usize, time: f64 },
}

impl Error {
    /// True for failures of a numerical invariant, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IntegrationDiverged { .. }
                | Error::StepSize { .. }
                | Error::GeneratorSign { .. }
                | Error::RunawayTrajectory { .. }
        )
    }
}
