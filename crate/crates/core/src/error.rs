use thiserror::Error;

use crate::spectral::EtaEstimate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid walk spec: {0}")]
    InvalidSpec(String),

    /// A nonpositive `Q_j(theta)` was met, so `theta` lies below the spectral edge.
    #[error("theta = {theta} is below eta: Q_{index}(theta) is not positive")]
    ThetaBelowEta { theta: f64, index: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("inverse iteration did not converge for eigenvalue {eigenvalue} (residual {residual:e})")]
    ConvergenceFailure { eigenvalue: f64, residual: f64 },

    #[error("eta estimate did not converge up to order {}", .0.truncation_orders.last().copied().unwrap_or(0))]
    NotConverged(Box<EtaEstimate>),

    #[error("resource limit exceeded: {what} needs {needed}, cap is {cap}")]
    ResourceLimit {
        what: &'static str,
        needed: u64,
        cap: u64,
    },

    #[error("invalid base walk for the example construction: {0}")]
    InvalidBase(String),

    #[error("exact arithmetic unavailable: {0}")]
    ExactUnavailable(String),
}
