//! Comparison systems: a static three-member weighted ensemble and a
//! rule-based adapter built on the same members.
//!
//! The sequence member is an LSTM classifier standing in for a Transformer
//! encoder.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::evolve::RHO_RANGE;
use crate::metrics::ConfusionCounts;
use crate::neural::{sigmoid, train_bce, HeadKind, LstmNet, NeuralError, TrainConfig, TrainReport, Trainable};
use crate::rul::window_ending_at;

pub const STATIC_WEIGHTS: [f64; 3] = [0.4, 0.4, 0.2];
pub const MEMBER_NAMES: [&str; 3] = ["ocsvm", "iforest", "lstm"];
pub const SEQUENCE_MEMBER: &str = "LSTM classifier (substitute for Transformer)";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BaselineError {
    #[error("labels contain a single class")]
    SingleClass,
    #[error("every member has zero F1")]
    AllZeroPerformance,
    #[error("member `{0}` is not fitted")]
    UnfittedMember(&'static str),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// Σ w_m a_m for member scores ordered (OCSVM, IF, sequence).
pub fn baseline1_score(scores: &[f64; 3], weights: &[f64; 3]) -> f64 {
    scores.iter().zip(weights).map(|(a, w)| a * w).sum()
}

/// τ in 0.01..=0.99 (step 0.01) maximising F1 of `score > τ`.
pub fn calibrate_threshold_once(scores: &[f64], labels: &[bool]) -> Result<f64, BaselineError> {
    let grid: Vec<f64> = (1..100).map(|k| k as f64 / 100.0).collect();
    calibrate_threshold_on_grid(scores, labels, &grid)
}

/// F1-maximising grid point; ties go to the smallest τ.
pub fn calibrate_threshold_on_grid(scores: &[f64], labels: &[bool], grid: &[f64]) -> Result<f64, BaselineError> {
    if scores.len() != labels.len() {
        return Err(BaselineError::LengthMismatch(scores.len(), labels.len()));
    }
    if grid.is_empty() || scores.is_empty() {
        return Err(BaselineError::Empty);
    }
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        return Err(BaselineError::SingleClass);
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (f64::NEG_INFINITY, sorted[0]);
    for &t in &sorted {
        let preds: Vec<bool> = scores.iter().map(|&s| s > t).collect();
        let f1 = ConfusionCounts::from_predictions(&preds, labels)
            .map_err(|_| BaselineError::LengthMismatch(scores.len(), labels.len()))?
            .f1();
        if f1 > best.0 {
            best = (f1, t);
        }
    }
    Ok(best.1)
}

/// ±0.02 by F1 band, kept inside the contamination range.
pub fn rule_update_contamination(rho: f64, f1: f64) -> f64 {
    let next = if f1 < 0.6 {
        rho + 0.02
    } else if f1 > 0.7 {
        rho - 0.02
    } else {
        rho
    };
    next.clamp(RHO_RANGE.0, RHO_RANGE.1)
}

/// τ − 0.05(P − R) when |P − R| > 0.05, clamped to the open unit interval.
/// Precision above recall lowers τ.
pub fn rule_update_threshold(tau: f64, precision: f64, recall: f64) -> f64 {
    if (precision - recall).abs() <= 0.05 {
        return tau;
    }
    (tau - 0.05 * (precision - recall)).clamp(1e-6, 1.0 - 1e-6)
}

/// F1-proportional weights.
pub fn rule_update_weights(member_f1: &[f64; 3]) -> Result<[f64; 3], BaselineError> {
    let s: f64 = member_f1.iter().map(|f| f.max(0.0)).sum();
    if s.is_nan() || s <= 0.0 {
        return Err(BaselineError::AllZeroPerformance);
    }
    Ok(member_f1.map(|f| f.max(0.0) / s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequenceScorerConfig {
    pub window: usize,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub max_sequences: usize,
    pub train: TrainConfig,
}

impl Default for SequenceScorerConfig {
    fn default() -> Self {
        Self {
            window: 10,
            hidden: vec![32],
            dropout: 0.0,
            max_sequences: 1024,
            train: TrainConfig { epochs: 50, patience: 10, ..TrainConfig::default() },
        }
    }
}

/// LSTM classifier over windows of consecutive standardized rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceScorer {
    pub net: LstmNet,
    pub window: usize,
    pub report: Option<TrainReport>,
}

impl SequenceScorer {
    pub fn fit(rows: &[Vec<f64>], labels: &[bool], cfg: &SequenceScorerConfig) -> Result<Self, BaselineError> {
        if rows.is_empty() {
            return Err(BaselineError::Empty);
        }
        if rows.len() != labels.len() {
            return Err(BaselineError::LengthMismatch(rows.len(), labels.len()));
        }
        let n = rows.len();
        let mut idx: Vec<usize> = if n > cfg.max_sequences {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed ^ 0x7e9);
            sample(&mut rng, n, cfg.max_sequences).into_vec()
        } else {
            (0..n).collect()
        };
        idx.sort_unstable();
        let xs: Vec<Vec<Vec<f64>>> = idx.iter().map(|&i| window_ending_at(rows, i, cfg.window)).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| if labels[i] { 1.0 } else { 0.0 }).collect();
        let mut net = LstmNet::new(rows[0].len(), &cfg.hidden, cfg.dropout, HeadKind::Sigmoid, cfg.train.seed);
        let report = train_bce(&mut net, &xs, &ys, &cfg.train)?;
        Ok(Self { net, window: cfg.window, report: Some(report) })
    }

    /// Anomaly probability for the window ending at `end`.
    pub fn score_at(&self, rows: &[Vec<f64>], end: usize) -> Result<f64, BaselineError> {
        Ok(self.net.predict(&window_ending_at(rows, end, self.window))?)
    }
}

/// Maps raw member outputs to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberScaling {
    /// Std of OCSVM raw training scores.
    pub ocsvm_sd: f64,
    /// Std of forest training scores.
    pub iforest_sd: f64,
}

impl MemberScaling {
    pub fn from_training(ocsvm_raw: &[f64], iforest: &[f64]) -> Self {
        let sd = |xs: &[f64]| {
            let n = xs.len().max(1) as f64;
            let m = xs.iter().sum::<f64>() / n;
            let s = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        };
        Self { ocsvm_sd: sd(ocsvm_raw), iforest_sd: sd(iforest) }
    }

    /// (OCSVM, IF, sequence) scores. The forest score is centred on its
    /// contamination threshold so ρ moves it.
    pub fn scores(&self, ocsvm_raw: f64, iforest: f64, iforest_thr: f64, seq_prob: f64) -> [f64; 3] {
        [
            sigmoid(ocsvm_raw / self.ocsvm_sd),
            sigmoid((iforest - iforest_thr) / self.iforest_sd),
            seq_prob.clamp(0.0, 1.0),
        ]
    }
}

/// Raw member outputs for one test sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberOutputs {
    pub ocsvm_raw: f64,
    pub iforest: f64,
    pub seq_prob: f64,
}

impl MemberOutputs {
    /// Each member's own vote: OCSVM outside its boundary, forest above its
    /// ρ-threshold, sequence probability above 0.5.
    pub fn votes(&self, iforest_thr: f64) -> [bool; 3] {
        [self.ocsvm_raw > 0.0, self.iforest > iforest_thr, self.seq_prob > 0.5]
    }
}

/// Frozen weights and threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticEnsemble {
    pub weights: [f64; 3],
    pub tau: f64,
    pub rho: f64,
    pub scaling: MemberScaling,
}

impl StaticEnsemble {
    pub fn score(&self, m: &MemberOutputs, iforest_thr: f64) -> f64 {
        baseline1_score(&self.scaling.scores(m.ocsvm_raw, m.iforest, iforest_thr, m.seq_prob), &self.weights)
    }

    pub fn decide(&self, m: &MemberOutputs, iforest_thr: f64) -> bool {
        self.score(m, iforest_thr) > self.tau
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleState {
    pub rho: f64,
    pub tau: f64,
    pub weights: [f64; 3],
    pub iteration: usize,
}

impl RuleState {
    pub fn new(rho: f64, tau: f64) -> Self {
        Self { rho, tau, weights: STATIC_WEIGHTS, iteration: 1 }
    }

    /// Applies all three rules after an iteration. Weights are left alone
    /// when no member scored.
    pub fn advance(&self, f1: f64, precision: f64, recall: f64, member_f1: &[f64; 3]) -> Self {
        Self {
            rho: rule_update_contamination(self.rho, f1),
            tau: rule_update_threshold(self.tau, precision, recall),
            weights: rule_update_weights(member_f1).unwrap_or(self.weights),
            iteration: self.iteration + 1,
        }
    }
}
