//! Stand-in for the maintenance crew that reviews response plans.

use serde::{Deserialize, Serialize};

use crate::consensus::{ResponsePlan, SeverityBand};

/// Accepts a plan for a real fault when its severity band is within
/// `tolerance` bands of the band of the fault's true severity. Plans raised
/// on normal samples are rejected. With `disagreement > 0` a fraction of
/// verdicts is flipped by a hash of (seed, tick), so results stay
/// reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulatedOperator {
    pub tolerance: usize,
    pub disagreement: f64,
    pub seed: u64,
}

impl Default for SimulatedOperator {
    fn default() -> Self {
        Self { tolerance: 1, disagreement: 0.0, seed: 0 }
    }
}

fn band_index(b: SeverityBand) -> usize {
    match b {
        SeverityBand::Low => 0,
        SeverityBand::Medium => 1,
        SeverityBand::High => 2,
    }
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SimulatedOperator {
    /// `true_severity` is the ground-truth severity in [0, 1].
    pub fn judge(&self, plan: &ResponsePlan, is_fault: bool, true_severity: f64) -> bool {
        let verdict =
            is_fault && band_index(plan.band).abs_diff(band_index(SeverityBand::of(true_severity))) <= self.tolerance;
        if self.disagreement > 0.0 {
            let u = (mix(self.seed ^ mix(plan.tick)) >> 11) as f64 / (1u64 << 53) as f64;
            if u < self.disagreement {
                return !verdict;
            }
        }
        verdict
    }
}

/// Free-function form of [`SimulatedOperator::judge`].
pub fn simulate_operator(op: &SimulatedOperator, plan: &ResponsePlan, is_fault: bool, true_severity: f64) -> bool {
    op.judge(plan, is_fault, true_severity)
}

/// Plans reviewed and accepted over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceTally {
    pub plans: usize,
    pub accepted: usize,
}

impl AcceptanceTally {
    pub fn add(&mut self, accepted: bool) {
        self.plans += 1;
        self.accepted += usize::from(accepted);
    }

    pub fn merge(&mut self, other: &AcceptanceTally) {
        self.plans += other.plans;
        self.accepted += other.accepted;
    }

    /// Simulated acceptance rate; 0 when no plans were raised.
    pub fn rate(&self) -> f64 {
        if self.plans == 0 {
            0.0
        } else {
            self.accepted as f64 / self.plans as f64
        }
    }
}
