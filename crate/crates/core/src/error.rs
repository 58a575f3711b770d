use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not Hermitian positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("stream {stream} has a zero precoder or decoder column")]
    DegenerateStream { stream: usize },

    #[error("coupling diagonal D[{stream}] = {value:e} is not positive; refresh the receivers before the power program")]
    NonPositiveCoupling { stream: usize, value: f64 },

    #[error("uplink noise fixed point did not converge after {iterations} sweeps (residual {residual:e})")]
    FixedPointDiverged { iterations: usize, residual: f64 },

    #[error("geometric program is infeasible")]
    GpInfeasible,

    #[error(
        "geometric program stopped without converging (gap {gap:e}, {iterations} Newton steps)"
    )]
    GpNotConverged { gap: f64, iterations: usize },

    #[error("undefined transfer: {0}")]
    UndefinedTransfer(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
