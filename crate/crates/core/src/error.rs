use thiserror::Error;

use crate::resonance::CouplingCluster;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configured size bound would be exceeded.
    #[error("resource bound exceeded: {what} (limit {limit})")]
    Resource { what: String, limit: usize },

    /// Cluster closure grew past its size bound. The partial cluster is kept
    /// so callers can inspect how far the search went.
    #[error("coupling cluster exceeds {limit} members")]
    ClusterTooLarge {
        limit: usize,
        partial: Box<CouplingCluster>,
    },

    /// The requested computation has no implementation for this input shape.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The ODE integrator could not continue.
    #[error("integration failed at t = {t}: {reason}")]
    Integration {
        t: f64,
        reason: String,
        /// Last accepted state vector (interleaved real layout of the integrator).
        last_state: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
