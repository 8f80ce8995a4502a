use thiserror::Error;

/// Errors raised across the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("ground state is not strictly positive (min interior value {min_value:e}); enlarge u_max or refine the grid")]
    GroundStateSign { min_value: f64 },

    #[error("transition row {row} sums to {sum} before renormalisation (tolerance {tolerance:e})")]
    TransitionNormalization { row: usize, sum: f64, tolerance: f64 },

    #[error("non-finite potential encountered in Markov chain at step {step}")]
    Divergence { step: usize },

    #[error("flow aborted at t = {time}: field became non-finite")]
    FlowAborted {
        time: f64,
        /// Snapshots recorded before the abort, the last one finite.
        partial: Box<crate::flow::Trajectory>,
    },

    #[error("{aborted} of {total} ensemble members aborted (more than 1%)")]
    EnsembleAborted { aborted: usize, total: usize },

    #[error("mismatched grids: {0}")]
    GridMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing input files in {dir}: {missing:?}")]
    MissingInputs { dir: String, missing: Vec<String> },

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
