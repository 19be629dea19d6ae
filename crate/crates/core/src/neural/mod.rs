//! Small hand-written neural core: dense and LSTM layers with explicit
//! backward passes, Adam, and BCE / MAE training loops.

mod adam;
mod dense;
mod lstm;

pub use adam::Adam;
pub use dense::{Activation, Dense, DenseCache, Mlp, MlpCache};
pub use lstm::{HeadKind, LstmCache, LstmLayer, LstmNet, LstmNetCache};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NeuralError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("backward called without a forward cache")]
    NoCache,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("labels must be 0 or 1, found {0}")]
    NonBinaryLabel(f64),
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<(), NeuralError> {
    if expected == got {
        Ok(())
    } else {
        Err(NeuralError::ShapeMismatch { expected, got })
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
pub(crate) fn init_uniform(n: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let a = 1.0 / (fan_in.max(1) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-a..=a)).collect()
}

pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

pub fn mae_loss(pred: f64, y: f64) -> f64 {
    (pred - y).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    /// Binary cross-entropy on a sigmoid output.
    Bce,
    /// Absolute error on a linear output.
    Mae,
    /// Squared error on a linear output.
    Mse,
}

impl Loss {
    pub fn value(self, out: f64, y: f64) -> f64 {
        match self {
            Loss::Bce => bce_loss(out, y),
            Loss::Mae => mae_loss(out, y),
            Loss::Mse => (out - y) * (out - y),
        }
    }

    /// Gradient of the loss. For BCE this is taken with respect to the
    /// logit of a sigmoid output (p - y); otherwise with respect to the
    /// output itself.
    pub fn grad(self, out: f64, y: f64) -> f64 {
        match self {
            Loss::Bce => out - y,
            Loss::Mae => {
                if out > y {
                    1.0
                } else if out < y {
                    -1.0
                } else {
                    0.0
                }
            }
            Loss::Mse => 2.0 * (out - y),
        }
    }
}

/// Scalar-output model trainable by [`fit`].
pub trait Trainable {
    type Input;

    fn n_params(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, p: &[f64]);
    /// Inference output (dropout off).
    fn predict(&self, x: &Self::Input) -> Result<f64, NeuralError>;
    /// Loss and accumulated gradient for one sample; `rng` enables dropout.
    fn loss_grad(
        &self,
        x: &Self::Input,
        y: f64,
        loss: Loss,
        grad: &mut [f64],
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<f64, NeuralError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub lr: f64,
    pub val_fraction: f64,
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 50, batch_size: 32, patience: 10, lr: 1e-3, val_fraction: 0.1, clip_norm: Some(5.0), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_val_loss: f64,
    pub early_stopped: bool,
}

pub fn clip_grad_norm(g: &mut [f64], max_norm: f64) {
    let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > max_norm {
        let s = max_norm / n;
        g.iter_mut().for_each(|v| *v *= s);
    }
}

pub fn mean_loss<M: Trainable>(model: &M, xs: &[M::Input], ys: &[f64], loss: Loss) -> Result<f64, NeuralError> {
    let mut total = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        total += loss.value(model.predict(x)?, y);
    }
    Ok(total / xs.len().max(1) as f64)
}

/// Mini-batch Adam with early stopping on a held-out slice. The model is
/// left holding its best-validation parameters.
pub fn fit<M>(
    model: &mut M,
    xs: &[M::Input],
    ys: &[f64],
    loss: Loss,
    cfg: &TrainConfig,
) -> Result<TrainReport, NeuralError>
where
    M: Trainable,
    M::Input: Clone,
{
    if xs.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    check_len(xs.len(), ys.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((xs.len() as f64 * cfg.val_fraction).round() as usize).min(xs.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let pick = |idx: &[usize]| -> (Vec<M::Input>, Vec<f64>) {
        (idx.iter().map(|&i| xs[i].clone()).collect(), idx.iter().map(|&i| ys[i]).collect())
    };
    let (tx, ty) = pick(train_idx);
    let (vx, vy) = if n_val == 0 { (tx.clone(), ty.clone()) } else { pick(val_idx) };

    let mut opt = Adam::new(model.n_params(), cfg.lr);
    let mut params = model.params();
    let mut best = params.clone();
    let mut best_val = mean_loss(model, &vx, &vy, loss)?;
    let mut report = TrainReport {
        epochs_run: 0,
        best_epoch: 0,
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_val_loss: best_val,
        early_stopped: false,
    };
    let mut since_best = 0;
    let mut idx: Vec<usize> = (0..tx.len()).collect();
    let mut grad = vec![0.0; params.len()];
    for epoch in 1..=cfg.epochs {
        idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in idx.chunks(cfg.batch_size.max(1)) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                epoch_loss += model.loss_grad(&tx[i], ty[i], loss, &mut grad, Some(&mut rng))?;
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if let Some(c) = cfg.clip_norm {
                clip_grad_norm(&mut grad, c);
            }
            opt.step(&mut params, &grad)?;
            model.set_params(&params);
        }
        report.train_loss.push(epoch_loss / tx.len() as f64);
        let v = mean_loss(model, &vx, &vy, loss)?;
        report.val_loss.push(v);
        report.epochs_run = epoch;
        if v < best_val {
            best_val = v;
            best.copy_from_slice(&params);
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                report.early_stopped = epoch < cfg.epochs;
                break;
            }
        }
    }
    report.best_val_loss = best_val;
    model.set_params(&best);
    Ok(report)
}

/// Binary classifier training; labels must be 0 or 1.
pub fn train_bce<M>(model: &mut M, xs: &[M::Input], ys: &[f64], cfg: &TrainConfig) -> Result<TrainReport, NeuralError>
where
    M: Trainable,
    M::Input: Clone,
{
    if let Some(&bad) = ys.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(NeuralError::NonBinaryLabel(bad));
    }
    if !ys.is_empty() && (ys.iter().all(|&y| y == 0.0) || ys.iter().all(|&y| y == 1.0)) {
        log::warn!("single-class training set; classifier will collapse to the class prior");
    }
    fit(model, xs, ys, Loss::Bce, cfg)
}
