//! Fog-tier detectors: Isolation Forest (agent B1) and the five-member
//! majority-vote ensemble (agent B2).

mod elliptic;
mod ensemble;
mod iforest;
mod lof;
mod ocsvm;

pub use elliptic::EllipticEnvelope;
pub use ensemble::{ensemble_vote, vote_fraction, EnsembleBank, EnsembleConfig, MemberKind, MemberScores};
pub use iforest::{average_path_length, harmonic, if_score_from_path, IsolationForest, IsolationTree, Node};
pub use lof::{lof_vote, LocalOutlierFactor, LOF_EPS};
pub use ocsvm::OneClassSvm;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DetectError {
    #[error("empty training set")]
    EmptyTrainSet,
    #[error("dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("contamination {0} outside (0, 0.5)")]
    InvalidContamination(f64),
    #[error("nu {0} outside (0, 1)")]
    InvalidNu(f64),
    #[error("need more than k={k} training points, got {n}")]
    TooFewNeighbors { k: usize, n: usize },
    #[error("covariance is degenerate even after regularization")]
    DegenerateCovariance,
    #[error("ensemble member `{0}` is not fitted")]
    UnfittedMember(String),
    #[error("snapshot version {found} not supported (expected {expected})")]
    SnapshotVersion { found: u32, expected: u32 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<(), DetectError> {
    if expected == got {
        Ok(())
    } else {
        Err(DetectError::DimensionMismatch { expected, got })
    }
}

/// Decision threshold calibrated on training scores at a given
/// contamination. The threshold is the `ceil(rho * n)`-th largest training
/// score; a point votes anomalous iff its score is strictly greater.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Training scores sorted descending.
    sorted_desc: Vec<f64>,
}

impl Calibration {
    pub fn new(mut scores: Vec<f64>) -> Self {
        scores.sort_by(|a, b| b.total_cmp(a));
        Self { sorted_desc: scores }
    }

    pub fn len(&self) -> usize {
        self.sorted_desc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_desc.is_empty()
    }

    pub fn threshold(&self, contamination: f64) -> f64 {
        if self.sorted_desc.is_empty() {
            return f64::INFINITY;
        }
        let n = self.sorted_desc.len();
        let k = ((contamination * n as f64).ceil() as usize).clamp(1, n);
        self.sorted_desc[k - 1]
    }

    pub fn training_scores(&self) -> &[f64] {
        &self.sorted_desc
    }
}

pub fn validate_contamination(rho: f64) -> Result<(), DetectError> {
    if rho > 0.0 && rho < 0.5 {
        Ok(())
    } else {
        Err(DetectError::InvalidContamination(rho))
    }
}

pub const SNAPSHOT_VERSION: u32 = 1;

/// Versioned JSON envelope for fitted models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot<T> {
    pub version: u32,
    pub kind: String,
    pub model: T,
}

pub fn save_snapshot<T: Serialize>(model: &T, kind: &str, path: impl AsRef<Path>) -> Result<(), DetectError> {
    let snap = Snapshot { version: SNAPSHOT_VERSION, kind: kind.to_string(), model };
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(f, &snap)?;
    Ok(())
}

pub fn load_snapshot<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T, DetectError> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let snap: Snapshot<T> = serde_json::from_reader(f)?;
    if snap.version != SNAPSHOT_VERSION {
        return Err(DetectError::SnapshotVersion { found: snap.version, expected: SNAPSHOT_VERSION });
    }
    Ok(snap.model)
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_ceil_ranked_score() {
        let scores: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let cal = Calibration::new(scores);
        // 320th largest of 0..999 is 680
        assert_eq!(cal.threshold(0.32), 680.0);
        assert_eq!(cal.threshold(0.3201), 679.0);
    }

    #[test]
    fn contamination_range() {
        assert!(validate_contamination(0.32).is_ok());
        assert!(validate_contamination(0.5).is_err());
        assert!(validate_contamination(0.0).is_err());
    }
}
