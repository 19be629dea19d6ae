//! Clipped-surrogate PPO with a tanh-squashed Gaussian policy.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::policy::{PolicyAction, PolicyState, RewardWeights, ACTION_LIMIT, CLIP_RANGE};
use super::EvolveError;
use crate::neural::{clip_grad_norm, Activation, Adam, Mlp};

const LOG_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub lr: f64,
    pub clip_eps: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub updates_per_iter: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub hidden: usize,
    pub log_std_init: f64,
    pub max_grad_norm: f64,
    pub reward: RewardWeights,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            clip_eps: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            updates_per_iter: 10,
            batch_size: 64,
            buffer_capacity: 10_000,
            hidden: 64,
            log_std_init: -1.0,
            max_grad_norm: 0.5,
            reward: RewardWeights::default(),
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        if !(CLIP_RANGE.0..=CLIP_RANGE.1).contains(&self.clip_eps) {
            return Err(EvolveError::InvalidConfig(format!("clip ratio {} outside [0.1, 0.3]", self.clip_eps)));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return Err(EvolveError::InvalidConfig("batch and buffer sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: PolicyState,
    pub action: PolicyAction,
    /// Pre-squash Gaussian sample.
    pub raw_action: [f64; 4],
    pub reward: f64,
    pub next_state: PolicyState,
    /// Log-density of `raw_action` under the behaviour policy.
    pub logprob: f64,
    pub done: bool,
}

/// Bounded FIFO of transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), items: VecDeque::new() }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// The newest `n` transitions, oldest first.
    pub fn latest(&self, n: usize) -> Vec<Transition> {
        let skip = self.items.len().saturating_sub(n);
        self.items.iter().skip(skip).cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}

/// Generalized advantage estimates. `values` holds one entry per reward plus
/// the bootstrap value of the final next-state; `dones[t]` cuts the recursion
/// after step t.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Result<Vec<f64>, EvolveError> {
    let n = rewards.len();
    if values.len() != n + 1 {
        return Err(EvolveError::LengthMismatch { expected: n + 1, got: values.len() });
    }
    if dones.len() != n {
        return Err(EvolveError::LengthMismatch { expected: n, got: dones.len() });
    }
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        next = delta + gamma * lambda * live * next;
        adv[t] = next;
    }
    Ok(adv)
}

/// Shift to mean 0 and scale to unit (population) std; a constant batch is
/// only centred.
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    for x in xs.iter_mut() {
        *x = if sd > 1e-12 { (*x - mean) / sd } else { *x - mean };
    }
}

/// min(r·A, clip(r, 1−ε, 1+ε)·A)
pub fn clipped_surrogate(ratio: f64, adv: f64, eps: f64) -> f64 {
    (ratio * adv).min(ratio.clamp(1.0 - eps, 1.0 + eps) * adv)
}

/// d/d(log π) of [`clipped_surrogate`]: r·A where the unclipped term is the
/// minimum, 0 where the clipped constant wins.
pub fn surrogate_logp_grad(ratio: f64, adv: f64, eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
    if ratio * adv <= clipped {
        ratio * adv
    } else {
        0.0
    }
}

pub fn gaussian_logprob(u: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    u.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((u, m), ls)| {
            let z = (u - m) / ls.exp();
            -0.5 * z * z - ls - LOG_SQRT_2PI
        })
        .sum()
}

pub fn squash(u: &[f64; 4]) -> PolicyAction {
    PolicyAction::new(u.map(|v| ACTION_LIMIT * v.tanh()))
}

/// Gaussian over pre-squash actions: mean from an MLP, state-independent
/// log-std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub mean_net: Mlp,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(hidden: usize, log_std_init: f64, seed: u64) -> Self {
        let mut mean_net = Mlp::new(
            &[PolicyState::DIM, hidden, hidden, PolicyAction::DIM],
            Activation::Tanh,
            Activation::Identity,
            seed,
        );
        // start near the zero action
        let mut p = mean_net.params();
        let out = mean_net.layers.last().map(|l| l.n_params()).unwrap_or(0);
        let n = p.len();
        for v in &mut p[n - out..] {
            *v *= 0.01;
        }
        mean_net.set_params(&p);
        Self { mean_net, log_std: vec![log_std_init; PolicyAction::DIM] }
    }

    pub fn n_params(&self) -> usize {
        self.mean_net.n_params() + self.log_std.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.mean_net.params();
        p.extend_from_slice(&self.log_std);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let n = self.mean_net.n_params();
        self.mean_net.set_params(&p[..n]);
        self.log_std.copy_from_slice(&p[n..]);
    }

    pub fn mean(&self, state: &[f64]) -> Result<Vec<f64>, EvolveError> {
        Ok(self.mean_net.forward(state)?)
    }

    pub fn logprob(&self, state: &[f64], u: &[f64]) -> Result<f64, EvolveError> {
        Ok(gaussian_logprob(u, &self.mean(state)?, &self.log_std))
    }

    pub fn sample(&self, state: &[f64], rng: &mut ChaCha8Rng) -> Result<([f64; 4], f64), EvolveError> {
        let mean = self.mean(state)?;
        let u: [f64; 4] = std::array::from_fn(|j| {
            let z: f64 = StandardNormal.sample(rng);
            mean[j] + self.log_std[j].exp() * z
        });
        let lp = gaussian_logprob(&u, &mean, &self.log_std);
        Ok((u, lp))
    }

    /// Negative mean clipped surrogate over a batch, accumulating its
    /// gradient into `grad`. Returns (loss, fraction of clipped samples).
    pub fn surrogate_loss_grad(
        &self,
        batch: &[SurrogateSample],
        eps: f64,
        grad: &mut [f64],
    ) -> Result<(f64, f64), EvolveError> {
        if grad.len() != self.n_params() {
            return Err(EvolveError::LengthMismatch { expected: self.n_params(), got: grad.len() });
        }
        if batch.is_empty() {
            return Err(EvolveError::EmptyBuffer);
        }
        let n_net = self.mean_net.n_params();
        let inv_n = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        let mut clipped = 0usize;
        for s in batch {
            let cache = self.mean_net.forward_cached(&s.state)?;
            let mean = cache.output();
            let logp = gaussian_logprob(&s.raw_action, mean, &self.log_std);
            let ratio = (logp - s.old_logprob).exp();
            loss -= clipped_surrogate(ratio, s.advantage, eps) * inv_n;
            if (ratio - ratio.clamp(1.0 - eps, 1.0 + eps)).abs() > 0.0 {
                clipped += 1;
            }
            let g = -surrogate_logp_grad(ratio, s.advantage, eps) * inv_n;
            if g == 0.0 {
                continue;
            }
            let mut d_mean = [0.0; 4];
            for j in 0..4 {
                let var = (2.0 * self.log_std[j]).exp();
                let diff = s.raw_action[j] - mean[j];
                d_mean[j] = g * diff / var;
                grad[n_net + j] += g * (diff * diff / var - 1.0);
            }
            self.mean_net.backward(Some(&cache), &d_mean, &mut grad[..n_net])?;
        }
        Ok((loss, clipped as f64 * inv_n))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSample {
    pub state: Vec<f64>,
    pub raw_action: [f64; 4],
    pub old_logprob: f64,
    pub advantage: f64,
}

/// Mean squared error of a scalar value net, gradient accumulated into `grad`.
pub fn value_loss_grad(net: &Mlp, states: &[Vec<f64>], targets: &[f64], grad: &mut [f64]) -> Result<f64, EvolveError> {
    if states.len() != targets.len() {
        return Err(EvolveError::LengthMismatch { expected: states.len(), got: targets.len() });
    }
    if states.is_empty() {
        return Err(EvolveError::EmptyBuffer);
    }
    let inv_n = 1.0 / states.len() as f64;
    let mut loss = 0.0;
    for (s, &y) in states.iter().zip(targets) {
        let cache = net.forward_cached(s)?;
        let v = cache.output()[0];
        loss += (v - y).powi(2) * inv_n;
        net.backward(Some(&cache), &[2.0 * (v - y) * inv_n], grad)?;
    }
    Ok(loss)
}

fn l2(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PpoDiagnostics {
    pub batch_size: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub policy_grad_norm: f64,
    pub value_grad_norm: f64,
    pub clip_fraction: f64,
    pub mean_advantage_raw: f64,
}

#[derive(Debug, Clone)]
pub struct PpoAgent {
    pub cfg: PpoConfig,
    pub policy: GaussianPolicy,
    pub value: Mlp,
    policy_opt: Adam,
    value_opt: Adam,
    rng: ChaCha8Rng,
    pub buffer: ReplayBuffer,
}

impl PpoAgent {
    pub fn new(cfg: PpoConfig) -> Result<Self, EvolveError> {
        cfg.validate()?;
        let policy = GaussianPolicy::new(cfg.hidden, cfg.log_std_init, cfg.seed);
        let value = Mlp::new(
            &[PolicyState::DIM, cfg.hidden, cfg.hidden, 1],
            Activation::Tanh,
            Activation::Identity,
            cfg.seed.wrapping_add(1),
        );
        Ok(Self {
            policy_opt: Adam::new(policy.n_params(), cfg.lr),
            value_opt: Adam::new(value.n_params(), cfg.lr),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2)),
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            policy,
            value,
            cfg,
        })
    }

    /// Stochastic action for exploration: (action, raw sample, log-prob).
    pub fn act(&mut self, state: &PolicyState) -> Result<(PolicyAction, [f64; 4], f64), EvolveError> {
        let (u, lp) = self.policy.sample(&state.to_vec(), &mut self.rng)?;
        Ok((squash(&u), u, lp))
    }

    /// Squashed mean action.
    pub fn act_greedy(&self, state: &PolicyState) -> Result<PolicyAction, EvolveError> {
        let m = self.policy.mean(&state.to_vec())?;
        Ok(squash(&[m[0], m[1], m[2], m[3]]))
    }

    pub fn observe(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    /// `updates_per_iter` full-batch epochs over the newest `batch_size`
    /// transitions.
    pub fn update(&mut self) -> Result<PpoDiagnostics, EvolveError> {
        if self.buffer.is_empty() {
            return Err(EvolveError::EmptyBuffer);
        }
        let batch = self.buffer.latest(self.cfg.batch_size);
        let states: Vec<Vec<f64>> = batch.iter().map(|t| t.state.to_vec()).collect();
        let mut values = Vec::with_capacity(batch.len() + 1);
        for s in &states {
            values.push(self.value.forward(s)?[0]);
        }
        let last = batch.last().map(|t| t.next_state.to_vec()).unwrap_or_default();
        values.push(self.value.forward(&last)?[0]);
        let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
        let dones: Vec<bool> = batch.iter().map(|t| t.done).collect();
        let adv_raw = gae(&rewards, &values, &dones, self.cfg.gamma, self.cfg.gae_lambda)?;
        let returns: Vec<f64> = adv_raw.iter().zip(&values).map(|(a, v)| a + v).collect();
        let mut adv = adv_raw.clone();
        normalize(&mut adv);
        let samples: Vec<SurrogateSample> = batch
            .iter()
            .zip(&states)
            .zip(&adv)
            .map(|((t, s), &a)| SurrogateSample {
                state: s.clone(),
                raw_action: t.raw_action,
                old_logprob: t.logprob,
                advantage: a,
            })
            .collect();

        let mut diag = PpoDiagnostics {
            batch_size: batch.len(),
            mean_advantage_raw: adv_raw.iter().sum::<f64>() / adv_raw.len() as f64,
            ..PpoDiagnostics::default()
        };
        for _ in 0..self.cfg.updates_per_iter {
            let mut gp = vec![0.0; self.policy.n_params()];
            let (pl, cf) = self.policy.surrogate_loss_grad(&samples, self.cfg.clip_eps, &mut gp)?;
            diag.policy_loss = pl;
            diag.clip_fraction = cf;
            diag.policy_grad_norm = l2(&gp);
            clip_grad_norm(&mut gp, self.cfg.max_grad_norm);
            let mut p = self.policy.params();
            self.policy_opt.step(&mut p, &gp)?;
            self.policy.set_params(&p);

            let mut gv = vec![0.0; self.value.n_params()];
            diag.value_loss = value_loss_grad(&self.value, &states, &returns, &mut gv)?;
            diag.value_grad_norm = l2(&gv);
            clip_grad_norm(&mut gv, self.cfg.max_grad_norm);
            let mut v = self.value.params();
            self.value_opt.step(&mut v, &gv)?;
            self.value.set_params(&v);
        }
        Ok(diag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn clip_arithmetic() {
        assert_abs_diff_eq!(clipped_surrogate(1.5, 1.0, 0.2), 1.2, epsilon = 1e-12);
        assert_eq!(surrogate_logp_grad(1.5, 1.0, 0.2), 0.0);
        // negative advantage keeps the unclipped (smaller) term
        assert_abs_diff_eq!(clipped_surrogate(1.5, -1.0, 0.2), -1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(surrogate_logp_grad(1.0, 0.7, 0.2), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn gae_limits() {
        let r = [1.0, 0.5, -0.2];
        let v = [0.3, 0.1, 0.4, 0.2];
        let d = [false; 3];
        let td = gae(&r, &v, &d, 0.9, 0.0).unwrap();
        for t in 0..3 {
            assert_abs_diff_eq!(td[t], r[t] + 0.9 * v[t + 1] - v[t], epsilon = 1e-12);
        }
        let mc = gae(&r, &[0.0; 4], &d, 0.9, 1.0).unwrap();
        assert_abs_diff_eq!(mc[0], 1.0 + 0.9 * 0.5 + 0.81 * -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(mc[2], -0.2, epsilon = 1e-12);
    }

    #[test]
    fn gae_hand_unrolled() {
        let (g, l) = (0.99, 0.95);
        let r = [0.2, -0.1, 0.4];
        let v = [0.5, 0.3, 0.1, 0.6];
        let d2 = r[2] + g * v[3] - v[2];
        let d1 = r[1] + g * v[2] - v[1];
        let d0 = r[0] + g * v[1] - v[0];
        let a2 = d2;
        let a1 = d1 + g * l * a2;
        let a0 = d0 + g * l * a1;
        let got = gae(&r, &v, &[false; 3], g, l).unwrap();
        assert_abs_diff_eq!(got[0], a0, epsilon = 1e-12);
        assert_abs_diff_eq!(got[1], a1, epsilon = 1e-12);
        assert_abs_diff_eq!(got[2], a2, epsilon = 1e-12);
    }

    #[test]
    fn gae_done_cuts_bootstrap() {
        let got = gae(&[1.0, 1.0], &[0.0, 5.0, 7.0], &[true, true], 0.99, 0.95).unwrap();
        assert_eq!(got, vec![1.0, -4.0]);
        assert!(matches!(gae(&[1.0], &[0.0], &[false], 0.9, 0.9), Err(EvolveError::LengthMismatch { .. })));
    }

    #[test]
    fn normalize_moments() {
        let mut xs = vec![1.0, 2.0, 3.0, 10.0];
        normalize(&mut xs);
        let m = xs.iter().sum::<f64>() / 4.0;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(m, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fifo_eviction() {
        let s = PolicyState {
            f1: 0.0,
            precision: 0.0,
            recall: 0.0,
            tunables: super::super::policy::Tunables::new(0.42, 0.32, 0.5),
        };
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(Transition {
                state: s,
                action: PolicyAction::zero(),
                raw_action: [0.0; 4],
                reward: i as f64,
                next_state: s,
                logprob: 0.0,
                done: false,
            });
        }
        assert_eq!(b.len(), 3);
        let r: Vec<f64> = b.latest(2).iter().map(|t| t.reward).collect();
        assert_eq!(r, vec![3.0, 4.0]);
    }

    #[test]
    fn empty_buffer_update() {
        let mut a = PpoAgent::new(PpoConfig::default()).unwrap();
        assert_eq!(a.update().unwrap_err(), EvolveError::EmptyBuffer);
        assert!(PpoAgent::new(PpoConfig { clip_eps: 0.5, ..PpoConfig::default() }).is_err());
    }
}
