use nalgebra::DVector;
use thiserror::Error;

/// Everything that can go wrong in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("estimator state error: {0}")]
    State(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("constraint set is empty: {0}")]
    InfeasibleSet(String),

    /// Dykstra ran out of sweeps; `partial` is the last iterate it produced.
    #[error("dykstra did not converge after {sweeps} sweeps (violation {violation:.3e})")]
    NonConvergence {
        sweeps: usize,
        violation: f64,
        partial: Box<crate::geometry::ProjectionReport>,
    },

    /// The iterate blew up; `last_finite` is the last good point.
    #[error("iterate diverged at iteration {iteration}")]
    Divergence {
        iteration: usize,
        last_finite: DVector<f64>,
    },

    /// A run diverged; `trace` holds everything recorded before that.
    #[error("run diverged at iteration {iteration}")]
    RunDiverged {
        iteration: usize,
        trace: Box<crate::trace::RunTrace>,
    },

    #[error("reference solve not certified after {iterations} iterations (residual {residual:.3e}, violation {violation:.3e})")]
    NotCertified {
        iterations: usize,
        residual: f64,
        violation: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used in error JSON emitted by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Argument(_) => "argument",
            Error::Config(_) => "config",
            Error::State(_) => "state",
            Error::Internal(_) => "internal",
            Error::InfeasibleSet(_) => "infeasible_set",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Divergence { .. } | Error::RunDiverged { .. } => "divergence",
            Error::NotCertified { .. } => "not_certified",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
