use serde::Serialize;

use crate::baselines::BaselineError;
use crate::bus::BusError;
use crate::consensus::ConsensusError;
use crate::datagen::DataError;
use crate::detect::DetectError;
use crate::edge::EdgeError;
use crate::evolve::EvolveError;
use crate::federate::FederateError;
use crate::metrics::MetricsError;
use crate::neural::NeuralError;
use crate::rul::RulError;

/// Crate-wide error.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Edge(#[from] EdgeError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Rul(#[from] RulError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Federate(#[from] FederateError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("worker thread panicked: {0}")]
    Worker(String),
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Edge(_) => "edge",
            Error::Bus(_) => "bus",
            Error::Detect(_) => "detect",
            Error::Consensus(_) => "consensus",
            Error::Neural(_) => "neural",
            Error::Rul(_) => "rul",
            Error::Evolve(_) => "evolve",
            Error::Federate(_) => "federate",
            Error::Baseline(_) => "baseline",
            Error::Metrics(_) => "metrics",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Worker(_) => "worker",
        }
    }

    /// Machine-readable form for the command line.
    pub fn report(&self) -> ErrorReport {
        ErrorReport { error: self.kind(), message: self.to_string() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
