//! Offline environment that replays Fog feedback under candidate tunables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::{apply_action, reward, PolicyAction, PolicyState, RewardWeights, Tunables};
use super::EvolveError;
use crate::detect::{Calibration, DetectError, EnsembleBank};
use crate::metrics::ConfusionCounts;

pub const EPISODE_LEN: usize = 3;

/// One scored Fog sample with its ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub a1: f64,
    pub raw: [f64; 5],
    pub label: bool,
    pub latency_ms: f64,
}

/// Recomputes member vote thresholds at any contamination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberThresholds {
    calibrations: Vec<Option<Calibration>>,
}

impl MemberThresholds {
    /// `None` members keep a fixed zero threshold.
    pub fn new(training_scores: [Option<Vec<f64>>; 5]) -> Self {
        Self { calibrations: training_scores.into_iter().map(|s| s.map(Calibration::new)).collect() }
    }

    pub fn from_bank(bank: &EnsembleBank) -> Result<Self, DetectError> {
        let [a, _, c, d, e] = bank.training_scores()?;
        Ok(Self::new([Some(a), None, Some(c), Some(d), Some(e)]))
    }

    pub fn at(&self, rho: f64) -> [f64; 5] {
        std::array::from_fn(|i| self.calibrations[i].as_ref().map_or(0.0, |c| c.threshold(rho)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub latency_ms: f64,
}

/// Which score the alert threshold is applied to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScorePath {
    /// w1·a1 + w2·a2
    #[default]
    Consensus,
    /// a1 alone; the weights are ignored.
    PrimaryOnly,
}

impl ScorePath {
    pub fn score(self, t: &Tunables, a1: f64, a2: f64) -> f64 {
        match self {
            ScorePath::Consensus => (t.w1 * a1 + t.w2 * a2).clamp(0.0, 1.0),
            ScorePath::PrimaryOnly => a1,
        }
    }
}

/// Consensus decisions of `t` over `records`.
pub fn decisions(records: &[FeedbackRecord], thresholds: &MemberThresholds, t: &Tunables) -> Vec<bool> {
    decisions_on(ScorePath::Consensus, records, thresholds, t)
}

pub fn decisions_on(
    path: ScorePath,
    records: &[FeedbackRecord],
    thresholds: &MemberThresholds,
    t: &Tunables,
) -> Vec<bool> {
    let thr = thresholds.at(t.rho);
    records
        .iter()
        .map(|r| {
            let k = r.raw.iter().zip(&thr).filter(|(s, th)| s > th).count();
            path.score(t, r.a1, k as f64 / 5.0) > t.tau
        })
        .collect()
}

pub fn evaluate<'a, I>(records: I, thresholds: &MemberThresholds, t: &Tunables) -> Evaluation
where
    I: IntoIterator<Item = &'a FeedbackRecord>,
{
    evaluate_on(ScorePath::Consensus, records, thresholds, t)
}

pub fn evaluate_on<'a, I>(path: ScorePath, records: I, thresholds: &MemberThresholds, t: &Tunables) -> Evaluation
where
    I: IntoIterator<Item = &'a FeedbackRecord>,
{
    let recs: Vec<FeedbackRecord> = records.into_iter().copied().collect();
    let preds = decisions_on(path, &recs, thresholds, t);
    let labels: Vec<bool> = recs.iter().map(|r| r.label).collect();
    let c = ConfusionCounts::from_predictions(&preds, &labels).unwrap_or_default();
    let latency =
        if recs.is_empty() { 0.0 } else { recs.iter().map(|r| r.latency_ms).sum::<f64>() / recs.len() as f64 };
    Evaluation { precision: c.precision(), recall: c.recall(), f1: c.f1(), latency_ms: latency }
}

/// F1 on `n` contiguous windows of the records.
pub fn window_f1(records: &[FeedbackRecord], thresholds: &MemberThresholds, t: &Tunables, n: usize) -> Vec<f64> {
    window_f1_on(ScorePath::Consensus, records, thresholds, t, n)
}

pub fn window_f1_on(
    path: ScorePath,
    records: &[FeedbackRecord],
    thresholds: &MemberThresholds,
    t: &Tunables,
    n: usize,
) -> Vec<f64> {
    if records.is_empty() || n == 0 {
        return Vec::new();
    }
    let size = records.len().div_ceil(n);
    records.chunks(size).map(|w| evaluate_on(path, w, thresholds, t).f1).collect()
}

/// Each step applies an action and scores the new tunables on a bootstrap
/// resample of the feedback; episodes last [`EPISODE_LEN`] steps.
#[derive(Debug, Clone)]
pub struct FeedbackEnv {
    records: Vec<FeedbackRecord>,
    thresholds: MemberThresholds,
    weights: RewardWeights,
    path: ScorePath,
    rng: ChaCha8Rng,
    state: Option<PolicyState>,
    steps: usize,
}

impl FeedbackEnv {
    pub fn new(
        records: Vec<FeedbackRecord>,
        thresholds: MemberThresholds,
        weights: RewardWeights,
        seed: u64,
    ) -> Result<Self, EvolveError> {
        if records.is_empty() {
            return Err(EvolveError::EmptyBuffer);
        }
        Ok(Self {
            records,
            thresholds,
            weights,
            path: ScorePath::Consensus,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: None,
            steps: 0,
        })
    }

    pub fn with_path(mut self, path: ScorePath) -> Self {
        self.path = path;
        self
    }

    pub fn path(&self) -> ScorePath {
        self.path
    }

    pub fn records(&self) -> &[FeedbackRecord] {
        &self.records
    }

    pub fn thresholds(&self) -> &MemberThresholds {
        &self.thresholds
    }

    pub fn evaluate(&self, t: &Tunables) -> Evaluation {
        evaluate_on(self.path, &self.records, &self.thresholds, t)
    }

    pub fn reset(&mut self, t: Tunables) -> PolicyState {
        let e = self.evaluate(&t);
        let s = PolicyState { f1: e.f1, precision: e.precision, recall: e.recall, tunables: t };
        self.state = Some(s);
        self.steps = 0;
        s
    }

    /// (next state, reward, done)
    pub fn step(&mut self, action: &PolicyAction) -> Result<(PolicyState, f64, bool), EvolveError> {
        let s = self.state.ok_or(EvolveError::NotReset)?;
        let t = apply_action(&s.tunables, action);
        let n = self.records.len();
        let sample: Vec<FeedbackRecord> = (0..n).map(|_| self.records[self.rng.random_range(0..n)]).collect();
        let e = evaluate_on(self.path, &sample, &self.thresholds, &t);
        let r = reward(e.f1, e.precision - s.precision, e.recall - s.recall, e.latency_ms, &self.weights);
        let next = PolicyState { f1: e.f1, precision: e.precision, recall: e.recall, tunables: t };
        self.steps += 1;
        let done = self.steps >= EPISODE_LEN;
        self.state = Some(next);
        Ok((next, r, done))
    }
}
