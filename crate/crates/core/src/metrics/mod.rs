//! Detection, regression and adaptation metrics.

mod stats;

pub use stats::{
    cohen_d, ln_gamma, mean_ci95, regularized_incomplete_beta, student_t_cdf, student_t_quantile, welch_t, MeanCi,
    WelchResult,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("only one class present")]
    SingleClass,
    #[error("need at least 2 observations per sample, got {0}")]
    TooFewSamples(usize),
    #[error("need at least 2 iterations, got {0}")]
    TooFewIterations(usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_predictions(predictions: &[bool], labels: &[bool]) -> Result<Self, MetricsError> {
        if predictions.len() != labels.len() {
            return Err(MetricsError::LengthMismatch(predictions.len(), labels.len()));
        }
        let mut c = ConfusionCounts::default();
        for (&p, &y) in predictions.iter().zip(labels) {
            match (p, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn summary(&self) -> ClassificationMetrics {
        ClassificationMetrics {
            counts: *self,
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
            accuracy: self.accuracy(),
        }
    }
}

// zero denominators map to 0
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

pub fn classification_metrics(predictions: &[bool], labels: &[bool]) -> Result<ClassificationMetrics, MetricsError> {
    Ok(ConfusionCounts::from_predictions(predictions, labels)?.summary())
}

/// ROC-AUC as the normalized Mann-Whitney U statistic (midranks for ties).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; tied block shares the average rank
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += mid_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mae: f64,
    pub rmse: f64,
}

pub fn regression_metrics(preds: &[f64], truths: &[f64]) -> Result<RegressionMetrics, MetricsError> {
    if preds.len() != truths.len() {
        return Err(MetricsError::LengthMismatch(preds.len(), truths.len()));
    }
    if preds.is_empty() {
        return Ok(RegressionMetrics { mae: 0.0, rmse: 0.0 });
    }
    let n = preds.len() as f64;
    let (abs, sq) = preds.iter().zip(truths).fold((0.0, 0.0), |(a, s), (p, t)| {
        let e = p - t;
        (a + e.abs(), s + e * e)
    });
    Ok(RegressionMetrics { mae: abs / n, rmse: (sq / n).sqrt() })
}

/// Final-iteration F1 minus first-iteration F1.
pub fn delta_f1(f1_by_iteration: &[f64]) -> Result<f64, MetricsError> {
    match f1_by_iteration {
        [first, .., last] => Ok(last - first),
        _ => Err(MetricsError::TooFewIterations(f1_by_iteration.len())),
    }
}

/// Per-iteration result row shared by all systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub roc_auc: f64,
    pub delta_f1: f64,
    pub latency_ms: f64,
    pub policy: PolicySnapshot,
}

/// The tunables in force during an iteration. Baselines fill only the
/// fields they have.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySnapshot {
    pub w1: f64,
    pub w2: f64,
    pub rho: f64,
    pub tau: f64,
}
