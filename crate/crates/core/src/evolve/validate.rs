//! Deployment gate for candidate policies.

use serde::{Deserialize, Serialize};

use super::policy::Tunables;
use super::shapley::{ShapleyReport, EFFICIENCY_TOL};
use super::EvolveError;
use crate::metrics::{welch_t, WelchResult};

pub const SIGNIFICANCE: f64 = 0.05;

/// Per-window F1 of the current and candidate policies on the same windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecentMetrics {
    pub current_f1: Vec<f64>,
    pub candidate_f1: Vec<f64>,
    /// First window recorded after a drift alarm, if any.
    pub drift_window: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    OutOfRange,
    F1Regression,
    DriftUnsettled,
    AttributionInconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub accepted: bool,
    pub reasons: Vec<RejectReason>,
    pub welch: Option<WelchResult>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn validate_policy(
    candidate: &Tunables,
    current: &Tunables,
    recent: &RecentMetrics,
    shapley: Option<&ShapleyReport>,
) -> Result<Verdict, EvolveError> {
    let have = recent.current_f1.len().min(recent.candidate_f1.len());
    if have < 2 {
        return Err(EvolveError::InsufficientHistory { needed: 2, got: have });
    }
    let mut reasons = Vec::new();
    if !candidate.in_range() {
        reasons.push(RejectReason::OutOfRange);
    }
    if let Some(r) = shapley {
        if r.efficiency_residual.is_nan() || r.efficiency_residual.abs() > EFFICIENCY_TOL {
            reasons.push(RejectReason::AttributionInconsistent);
        }
    }
    let mut welch = None;
    if candidate != current {
        let from = recent.drift_window.unwrap_or(0);
        let cur = recent.current_f1.get(from..).unwrap_or(&[]);
        let cand = recent.candidate_f1.get(from..).unwrap_or(&[]);
        if cur.len() < 2 || cand.len() < 2 {
            reasons.push(RejectReason::DriftUnsettled);
        } else {
            let w = welch_t(cand, cur).map_err(|e| EvolveError::Stats(e.to_string()))?;
            if mean(cand) < mean(cur) && w.p < SIGNIFICANCE {
                reasons.push(RejectReason::F1Regression);
            }
            welch = Some(w);
        }
    }
    Ok(Verdict { accepted: reasons.is_empty(), reasons, welch })
}
