use serde::{Deserialize, Serialize};

use crate::consensus::ConsensusPolicy;
use crate::metrics::PolicySnapshot;

pub const W_RANGE: (f64, f64) = (0.3, 0.7);
pub const RHO_RANGE: (f64, f64) = (0.25, 0.35);
pub const TAU_RANGE: (f64, f64) = (0.3, 0.8);
pub const CLIP_RANGE: (f64, f64) = (0.1, 0.3);
/// Per-component action limit.
pub const ACTION_LIMIT: f64 = 0.05;

pub const INITIAL_W1: f64 = 0.42;
pub const INITIAL_RHO: f64 = 0.32;

// Weights are snapped to multiples of 2^-40; then w2 = 1 - w1 is exact and
// w1 + w2 == 1.0 holds bit-for-bit.
const WEIGHT_QUANTUM: f64 = 1.0 / (1u64 << 40) as f64;

fn quantize(w: f64) -> f64 {
    (w / WEIGHT_QUANTUM).round() * WEIGHT_QUANTUM
}

/// The adaptable tunables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tunables {
    pub w1: f64,
    pub w2: f64,
    pub rho: f64,
    pub tau: f64,
}

impl Tunables {
    pub fn new(w1: f64, rho: f64, tau: f64) -> Self {
        let mut t = Self { w1, w2: 1.0 - w1, rho, tau };
        t.repair();
        t
    }

    /// Clamp every tunable into range and put the weights back on the simplex.
    pub fn repair(&mut self) {
        let (w1, w2) = (self.w1.max(0.0), self.w2.max(0.0));
        let s = w1 + w2;
        let w1 = if s > 0.0 && s.is_finite() { w1 / s } else { 0.5 };
        self.w1 = quantize(w1.clamp(W_RANGE.0, W_RANGE.1));
        self.w2 = 1.0 - self.w1;
        self.rho = finite_or(self.rho, INITIAL_RHO).clamp(RHO_RANGE.0, RHO_RANGE.1);
        self.tau = finite_or(self.tau, 0.5).clamp(TAU_RANGE.0, TAU_RANGE.1);
    }

    pub fn in_range(&self) -> bool {
        let within = |v: f64, r: (f64, f64)| v >= r.0 && v <= r.1;
        within(self.w1, W_RANGE)
            && within(self.w2, W_RANGE)
            && self.w1 + self.w2 == 1.0
            && within(self.rho, RHO_RANGE)
            && within(self.tau, TAU_RANGE)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.w1, self.w2, self.rho, self.tau]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut t = Self { w1: v[0], w2: v[1], rho: v[2], tau: v[3] };
        t.repair();
        t
    }

    pub fn consensus(&self) -> ConsensusPolicy {
        ConsensusPolicy { w1: self.w1, w2: self.w2, tau: self.tau }
    }

    pub fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot { w1: self.w1, w2: self.w2, rho: self.rho, tau: self.tau }
    }
}

fn finite_or(v: f64, fallback: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        fallback
    }
}

/// PPO observation: last-iteration metrics plus the tunables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub tunables: Tunables,
}

impl PolicyState {
    pub const DIM: usize = 7;

    /// [F1, P, R, w1, w2, rho, tau]
    pub fn to_vec(&self) -> Vec<f64> {
        let t = &self.tunables;
        vec![self.f1, self.precision, self.recall, t.w1, t.w2, t.rho, t.tau]
    }
}

/// Deltas for [w1, w2, rho, tau], each within ±[`ACTION_LIMIT`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyAction {
    pub deltas: [f64; 4],
}

impl PolicyAction {
    pub const DIM: usize = 4;

    pub fn new(deltas: [f64; 4]) -> Self {
        Self { deltas: deltas.map(|d| finite_or(d, 0.0).clamp(-ACTION_LIMIT, ACTION_LIMIT)) }
    }

    pub fn zero() -> Self {
        Self { deltas: [0.0; 4] }
    }
}

/// Adds the (clamped) deltas, then repairs ranges and the simplex.
pub fn apply_action(t: &Tunables, a: &PolicyAction) -> Tunables {
    let a = PolicyAction::new(a.deltas);
    let mut n =
        Tunables { w1: t.w1 + a.deltas[0], w2: t.w2 + a.deltas[1], rho: t.rho + a.deltas[2], tau: t.tau + a.deltas[3] };
    n.repair();
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_lat: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 0.1, gamma_lat: 0.001 }
    }
}

/// r = α·F1 − β·|ΔP − ΔR| − γ_lat·L, with L in milliseconds.
pub fn reward(f1: f64, delta_p: f64, delta_r: f64, latency_ms: f64, w: &RewardWeights) -> f64 {
    w.alpha * f1 - w.beta * (delta_p - delta_r).abs() - w.gamma_lat * latency_ms
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reward_examples() {
        let w = RewardWeights::default();
        assert_abs_diff_eq!(reward(0.5, 0.1, 0.0, 1.22, &w), 0.48878, epsilon = 1e-12);
        assert_eq!(reward(0.0, 0.2, 0.2, 0.0, &w), 0.0);
        assert_eq!(reward(1.0, 0.0, 0.0, 0.0, &w), 1.0);
    }

    #[test]
    fn tau_clamped() {
        let t = Tunables::new(0.42, 0.32, 0.79);
        let n = apply_action(&t, &PolicyAction::new([0.0, 0.0, 0.0, 0.05]));
        assert_eq!(n.tau, TAU_RANGE.1);
        let mut wild = Tunables { tau: 1.2, ..t };
        wild.repair();
        assert_eq!(wild.tau, TAU_RANGE.1);
    }

    #[test]
    fn simplex_after_joint_increase() {
        let t = Tunables::new(0.42, 0.32, 0.5);
        let n = apply_action(&t, &PolicyAction::new([0.01, 0.01, 0.0, 0.0]));
        assert_eq!(n.w1 + n.w2, 1.0);
        assert_abs_diff_eq!(n.w1, 0.43 / 1.02, epsilon = 1e-11);
    }

    #[test]
    fn table_iv_threshold_trajectory() {
        // 0.7327 -> 0.8000 needs more than one maximal step; two suffice
        let mut t = Tunables::new(0.4243, 0.32, 0.7327);
        let step = PolicyAction::new([0.0, 0.0, 0.0, 0.05]);
        t = apply_action(&t, &step);
        assert!(t.tau < 0.8);
        t = apply_action(&t, &step);
        assert_eq!(t.tau, 0.8);
    }

    #[test]
    fn action_clamped() {
        let a = PolicyAction::new([0.2, -0.2, f64::NAN, 0.01]);
        assert_eq!(a.deltas, [0.05, -0.05, 0.0, 0.01]);
    }
}
