use thiserror::Error;

/// Errors raised across problem construction, iteration and certification.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("momentum coefficient singular at k = {k} (k + r = 0 with r = {r})")]
    MomentumSingularity { k: usize, r: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("threshold search exceeded {cap} iterations")]
    SearchOverflow { cap: u64 },

    #[error("index {k} lies before the threshold K = {threshold}")]
    Domain { k: usize, threshold: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ODE is singular at t = {t}")]
    SingularTime { t: f64 },

    #[error("integrator blew up at t = {t}: f error {f_err:e} vs initial {initial:e}")]
    IntegratorBlowup { t: f64, f_err: f64, initial: f64 },

    #[error("trace ends at t = {t_max} before the threshold time T = {threshold}")]
    InsufficientHorizon { t_max: f64, threshold: f64 },

    #[error("recursion diverged at k = {k}")]
    Divergence { k: usize },

    #[error("only {admitted} admissible points, need at least {required}")]
    InsufficientData { admitted: usize, required: usize },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("run {id}: {source}")]
    Run { id: String, source: Box<Error> },

    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
