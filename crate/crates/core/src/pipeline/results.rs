use serde::{Deserialize, Serialize};

use super::config::System;
use super::operator::AcceptanceTally;
use crate::evolve::{RejectReason, Tunables};
use crate::metrics::IterationReport;

/// Per-iteration phase order of the main loop.
pub const PHASES: [&str; 16] = [
    "extract",
    "publish_chunks",
    "aggregate",
    "b1_score",
    "b2_vote",
    "fuse",
    "publish_anomalies",
    "respond",
    "drift_check",
    "collect_feedback",
    "ppo_update",
    "shap_validate",
    "publish_policy",
    "federated_agg",
    "apply_updates",
    "log_metrics",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseStatus {
    Ok,
    Skipped,
    Drift,
    Stable,
}

impl PhaseStatus {
    pub fn name(self) -> &'static str {
        match self {
            PhaseStatus::Ok => "ok",
            PhaseStatus::Skipped => "skipped",
            PhaseStatus::Drift => "drift",
            PhaseStatus::Stable => "stable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub iteration: usize,
    pub phase: String,
    pub status: PhaseStatus,
    pub count: usize,
}

/// Cloud-side outcome for one Fog instance in one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudLog {
    pub iteration: usize,
    pub fog: usize,
    pub records: usize,
    /// 1-based position in this Fog's stream where drift was flagged.
    pub drift_at: Option<usize>,
    pub transitions: usize,
    pub current: Tunables,
    pub candidate: Option<Tunables>,
    pub accepted: bool,
    pub reasons: Vec<RejectReason>,
    pub welch_p: Option<f64>,
    pub shapley_residual: Option<f64>,
    /// Tunables in force for the next iteration.
    pub applied: Tunables,
}

/// One system (or ablation variant) on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRun {
    pub system: System,
    pub variant: String,
    pub dataset: String,
    pub seed: u64,
    pub reports: Vec<IterationReport>,
    pub trace: Vec<PhaseRecord>,
    pub cloud: Vec<CloudLog>,
    pub acceptance: AcceptanceTally,
    /// Per-iteration test-set predictions, in stream order.
    pub predictions: Vec<Vec<bool>>,
    /// Per-iteration per-sample detection latency in ms, after warmup.
    pub latencies: Vec<Vec<f64>>,
}

impl SystemRun {
    pub fn f1s(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.f1).collect()
    }

    pub fn delta_f1(&self) -> f64 {
        self.reports.last().map_or(0.0, |r| r.delta_f1)
    }

    /// Median per-sample latency over all iterations.
    pub fn median_latency_ms(&self) -> f64 {
        let mut all: Vec<f64> = self.latencies.iter().flatten().copied().collect();
        if all.is_empty() {
            return f64::NAN;
        }
        all.sort_by(f64::total_cmp);
        let m = all.len() / 2;
        if all.len() % 2 == 1 {
            all[m]
        } else {
            (all[m - 1] + all[m]) / 2.0
        }
    }

    pub fn final_report(&self) -> Option<&IterationReport> {
        self.reports.last()
    }

    /// `system` or `system/variant` for non-full variants.
    pub fn label(&self) -> String {
        if self.variant == "full" {
            self.system.name().to_string()
        } else {
            format!("{}/{}", self.system.name(), self.variant)
        }
    }
}

/// Runs gathered by one command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub runs: Vec<SystemRun>,
}

impl ExperimentResults {
    pub fn extend(&mut self, other: ExperimentResults) {
        self.runs.extend(other.runs);
    }

    /// Distinct run labels in first-seen order.
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.runs {
            let l = r.label();
            if !out.contains(&l) {
                out.push(l);
            }
        }
        out
    }

    pub fn by_label(&self, label: &str) -> Vec<&SystemRun> {
        self.runs.iter().filter(|r| r.label() == label).collect()
    }
}
