use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("spectral condition violated: bound {bound} is not below mu1 = {mu1} (margin {margin})")]
    Spectral { mu1: f64, bound: f64, margin: f64 },

    #[error("singular system ({context})")]
    Singular { context: String },

    #[error("eigensolver did not converge (residual {residual:e})")]
    EigenNoConvergence { residual: f64 },

    #[error("Newton stalled at time step {step} after {iterations} iterations (residual {residual:e})")]
    NewtonStall {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("{context} did not converge: {detail}")]
    NotConverged { context: String, detail: String },

    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
