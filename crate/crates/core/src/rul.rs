//! Remaining-useful-life regression, run only on confirmed alerts.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::datagen::{RUL_MAX_HOURS, RUL_MIN_HOURS};
use crate::neural::{fit, HeadKind, Loss, LstmNet, NeuralError, TrainConfig, TrainReport, Trainable};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RulError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("model has not been trained")]
    Untrained,
    #[error("window has {got} rows, model expects {expected}")]
    WrongWindowLength { expected: usize, got: usize },
    #[error("label {0} outside [5, 100] hours")]
    LabelOutOfRange(f64),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RulConfig {
    pub window: usize,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub val_fraction: f64,
    /// Random subsample of training sequences; `None` keeps all.
    pub max_train_sequences: Option<usize>,
    pub seed: u64,
}

impl Default for RulConfig {
    fn default() -> Self {
        Self {
            window: 10,
            hidden: vec![64, 32, 32],
            dropout: 0.2,
            epochs: 10,
            batch_size: 32,
            lr: 1e-3,
            val_fraction: 0.1,
            max_train_sequences: Some(512),
            seed: 0,
        }
    }
}

/// LSTM regressor on windows of `window` rows. Targets are learned in
/// units of `label_scale` hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulModel {
    pub net: LstmNet,
    pub window: usize,
    pub label_scale: f64,
    pub trained: bool,
    pub report: Option<TrainReport>,
}

impl RulModel {
    pub fn new(n_features: usize, cfg: &RulConfig) -> Self {
        Self {
            net: LstmNet::new(n_features, &cfg.hidden, cfg.dropout, HeadKind::Linear, cfg.seed),
            window: cfg.window,
            label_scale: RUL_MAX_HOURS,
            trained: false,
            report: None,
        }
    }

    pub fn validation_mae_hours(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.best_val_loss * self.label_scale)
    }
}

/// Last `t` rows ending at `end` (inclusive); when fewer exist the first row
/// is repeated at the front.
pub fn window_ending_at(rows: &[Vec<f64>], end: usize, t: usize) -> Vec<Vec<f64>> {
    let start = (end + 1).saturating_sub(t);
    let mut w: Vec<Vec<f64>> = rows[start..=end].to_vec();
    while w.len() < t {
        w.insert(0, w[0].clone());
    }
    w
}

/// Sequences ending at every labelled row.
pub fn build_sequences(rows: &[Vec<f64>], labels: &[Option<f64>], t: usize) -> (Vec<Vec<Vec<f64>>>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        if let Some(y) = l {
            xs.push(window_ending_at(rows, i, t));
            ys.push(*y);
        }
    }
    (xs, ys)
}

pub fn rul_train(
    model: &mut RulModel,
    sequences: &[Vec<Vec<f64>>],
    labels: &[f64],
    cfg: &RulConfig,
) -> Result<TrainReport, RulError> {
    if sequences.is_empty() {
        return Err(RulError::EmptyDataset);
    }
    if let Some(&bad) = labels.iter().find(|&&y| !(RUL_MIN_HOURS..=RUL_MAX_HOURS).contains(&y)) {
        return Err(RulError::LabelOutOfRange(bad));
    }
    for s in sequences {
        if s.len() != model.window {
            return Err(RulError::WrongWindowLength { expected: model.window, got: s.len() });
        }
    }
    let (xs, ys): (Vec<Vec<Vec<f64>>>, Vec<f64>) = match cfg.max_train_sequences {
        Some(m) if sequences.len() > m => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5a17);
            let mut idx = sample(&mut rng, sequences.len(), m).into_vec();
            idx.sort_unstable();
            (idx.iter().map(|&i| sequences[i].clone()).collect(), idx.iter().map(|&i| labels[i]).collect())
        }
        _ => (sequences.to_vec(), labels.to_vec()),
    };
    let scaled: Vec<f64> = ys.iter().map(|y| y / model.label_scale).collect();
    // start the head at the label mean so training refines rather than climbs
    let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
    let mut p = model.net.params();
    let last = p.len() - 1;
    p[last] = mean;
    model.net.set_params(&p);
    let tc = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        patience: cfg.epochs.max(1),
        lr: cfg.lr,
        val_fraction: cfg.val_fraction,
        clip_norm: Some(5.0),
        seed: cfg.seed,
    };
    let report = fit(&mut model.net, &xs, &scaled, Loss::Mae, &tc)?;
    model.trained = true;
    model.report = Some(report.clone());
    Ok(report)
}

/// Predicted hours, clamped at 0.
pub fn rul_predict(model: &RulModel, window: &[Vec<f64>]) -> Result<f64, RulError> {
    if !model.trained {
        return Err(RulError::Untrained);
    }
    if window.len() != model.window {
        return Err(RulError::WrongWindowLength { expected: model.window, got: window.len() });
    }
    let out = model.net.predict(&window.to_vec())? * model.label_scale;
    Ok(if out.is_finite() { out.max(0.0) } else { 0.0 })
}
