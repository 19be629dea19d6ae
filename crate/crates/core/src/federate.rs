//! Sample-weighted averaging of policy vectors across Fog instances.

use serde::{Deserialize, Serialize};

use crate::evolve::Tunables;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FederateError {
    #[error("no contributions in this round")]
    EmptyRound,
    #[error("parameter length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("every contribution has zero samples")]
    AllZeroCounts,
    #[error("non-finite parameter from agent {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentContribution {
    pub agent_id: usize,
    pub n_samples: u64,
    pub params: Vec<f64>,
}

/// Per-agent weights recorded with each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub agents: Vec<(usize, u64)>,
    pub global: Vec<f64>,
}

fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// θ = Σ n_k θ_k / Σ n_k, elementwise.
///
/// Evaluated as min_k θ_k plus the weighted mean of offsets from it, in a
/// canonical contribution order, so the result is order independent, exact
/// for identical inputs and never leaves the contributors' hull.
pub fn aggregate(contributions: &[AgentContribution]) -> Result<Vec<f64>, FederateError> {
    let first = contributions.first().ok_or(FederateError::EmptyRound)?;
    let d = first.params.len();
    for c in contributions {
        if c.params.len() != d {
            return Err(FederateError::LengthMismatch { expected: d, got: c.params.len() });
        }
        if c.params.iter().any(|v| !v.is_finite()) {
            return Err(FederateError::NonFinite(c.agent_id));
        }
    }
    let mut live: Vec<&AgentContribution> = contributions.iter().filter(|c| c.n_samples > 0).collect();
    if live.is_empty() {
        return Err(FederateError::AllZeroCounts);
    }
    live.sort_by(|a, b| {
        a.agent_id.cmp(&b.agent_id).then(a.n_samples.cmp(&b.n_samples)).then_with(|| {
            let ka: Vec<u64> = a.params.iter().map(|v| v.to_bits()).collect();
            let kb: Vec<u64> = b.params.iter().map(|v| v.to_bits()).collect();
            ka.cmp(&kb)
        })
    });
    let total: u64 = live.iter().map(|c| c.n_samples).sum();
    let total = total as f64;
    Ok((0..d)
        .map(|j| {
            let lo = live.iter().map(|c| c.params[j]).fold(f64::INFINITY, f64::min);
            let hi = live.iter().map(|c| c.params[j]).fold(f64::NEG_INFINITY, f64::max);
            let offset = neumaier(live.iter().map(|c| c.n_samples as f64 * (c.params[j] - lo))) / total;
            (lo + offset).clamp(lo, hi)
        })
        .collect())
}

/// Aggregates [w1, w2, ρ, τ] vectors and re-applies the range and simplex
/// repair.
pub fn aggregate_tunables(contributions: &[AgentContribution]) -> Result<(Tunables, RoundLog), FederateError> {
    let global = aggregate(contributions)?;
    if global.len() != 4 {
        return Err(FederateError::LengthMismatch { expected: 4, got: global.len() });
    }
    let t = Tunables::from_slice(&global);
    let log =
        RoundLog { agents: contributions.iter().map(|c| (c.agent_id, c.n_samples)).collect(), global: t.to_vec() };
    Ok((t, log))
}
