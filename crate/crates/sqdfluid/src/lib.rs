//! Scenario files, CSV output, parallel ensembles and the command-line
//! front end for [`sqdfluid_core`].

// NaN must fail the range checks in config
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod ensemble;
pub mod output;
pub mod validate;

pub use config::{parse_scenario, Scenario};
pub use validate::ValidationReport;

use sqdfluid_core::ctmc::CtmcError;
use sqdfluid_core::{FluidError, MetricError, SimError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("numerical: {0}")]
    Numerical(String),
}

impl Error {
    /// Process exit code: 2 for configuration and IO problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            Error::Numerical(_) => 3,
        }
    }
}

impl From<FluidError> for Error {
    fn from(e: FluidError) -> Self {
        match e {
            FluidError::Instability { .. } | FluidError::NonFinite { .. } => Error::Numerical(e.to_string()),
            _ => Error::Config(e.to_string()),
        }
    }
}

impl From<MetricError> for Error {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Fluid(f) => f.into(),
            MetricError::NonFinite(_) | MetricError::NotConverged { .. } | MetricError::Unbounded { .. } | MetricError::Bracket { .. } => {
                Error::Numerical(e.to_string())
            }
            _ => Error::Config(e.to_string()),
        }
    }
}

impl From<SimError> for Error {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Metric(m) => m.into(),
            _ => Error::Config(e.to_string()),
        }
    }
}

impl From<CtmcError> for Error {
    fn from(e: CtmcError) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
