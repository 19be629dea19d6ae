use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_dim, Calibration, DetectError};

const SUBGRADIENT_STEPS: usize = 150;
const STEP0: f64 = 0.5;

/// ν-one-class linear model on random Fourier features approximating the
/// RBF kernel exp(-γ‖x − y‖²), γ = 1 / n_features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneClassSvm {
    pub nu: f64,
    pub gamma: f64,
    pub n_features: usize,
    /// D × n_features frequency matrix, row-major.
    omega: Vec<f64>,
    phase: Vec<f64>,
    pub weights: Vec<f64>,
    /// Decision offset: f(x) = w·φ(x) − offset.
    pub offset: f64,
    calibration: Calibration,
}

impl OneClassSvm {
    pub fn fit(train: &[Vec<f64>], nu: f64, dim: usize, seed: u64) -> Result<Self, DetectError> {
        if !(nu > 0.0 && nu < 1.0) {
            return Err(DetectError::InvalidNu(nu));
        }
        if train.is_empty() {
            return Err(DetectError::EmptyTrainSet);
        }
        let d = train[0].len();
        for row in train {
            check_dim(d, row.len())?;
        }
        let dim = dim.max(1);
        let gamma = 1.0 / d.max(1) as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, (2.0 * gamma).sqrt()).expect("finite std");
        let omega: Vec<f64> = (0..dim * d).map(|_| normal.sample(&mut rng)).collect();
        let phase: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        let mut model = Self {
            nu,
            gamma,
            n_features: d,
            omega,
            phase,
            weights: vec![0.0; dim],
            offset: 0.0,
            calibration: Calibration::new(Vec::new()),
        };

        let phi: Vec<Vec<f64>> = train.iter().map(|x| model.features(x)).collect();
        let n = phi.len() as f64;
        // start at the empirical kernel mean embedding
        let mut w = vec![0.0; dim];
        for p in &phi {
            for (wi, pi) in w.iter_mut().zip(p) {
                *wi += pi / n;
            }
        }
        let mut rho = quantile_of(&phi, &w, nu);
        let c = 1.0 / (nu * n);
        let mut grad = vec![0.0; dim];
        for t in 1..=SUBGRADIENT_STEPS {
            let eta = STEP0 / (t as f64).sqrt();
            grad.copy_from_slice(&w);
            let mut violators = 0usize;
            for p in &phi {
                if dot(&w, p) < rho {
                    violators += 1;
                    for (g, pi) in grad.iter_mut().zip(p) {
                        *g -= c * pi;
                    }
                }
            }
            for (wi, g) in w.iter_mut().zip(&grad) {
                *wi -= eta * g;
            }
            rho -= eta * (violators as f64 * c - 1.0);
            rho = rho.max(0.0);
        }
        model.weights = w;

        let neg: Vec<f64> = phi.iter().map(|p| -dot(&model.weights, p)).collect();
        model.calibration = Calibration::new(neg);
        model.offset = -model.calibration.threshold(nu);
        Ok(model)
    }

    fn features(&self, x: &[f64]) -> Vec<f64> {
        let d = self.n_features;
        let dim = self.phase.len();
        let scale = (2.0 / dim as f64).sqrt();
        (0..dim)
            .map(|j| {
                let row = &self.omega[j * d..(j + 1) * d];
                scale * (dot(row, x) + self.phase[j]).cos()
            })
            .collect()
    }

    /// Signed decision value; negative means anomalous.
    pub fn decision(&self, x: &[f64]) -> Result<f64, DetectError> {
        check_dim(self.n_features, x.len())?;
        Ok(dot(&self.weights, &self.features(x)) - self.offset)
    }

    /// Raw anomaly score, −decision. Positive means anomalous.
    pub fn score(&self, x: &[f64]) -> Result<f64, DetectError> {
        Ok(-self.decision(x)?)
    }

    pub fn vote(&self, x: &[f64]) -> Result<bool, DetectError> {
        Ok(self.decision(x)? < 0.0)
    }

    /// Raw scores of the training set (sorted descending).
    pub fn training_scores(&self) -> Vec<f64> {
        self.calibration.training_scores().iter().map(|s| s + self.offset).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quantile_of(phi: &[Vec<f64>], w: &[f64], q: f64) -> f64 {
    let mut s: Vec<f64> = phi.iter().map(|p| dot(w, p)).collect();
    s.sort_by(f64::total_cmp);
    let i = ((q * s.len() as f64) as usize).min(s.len() - 1);
    s[i]
}
