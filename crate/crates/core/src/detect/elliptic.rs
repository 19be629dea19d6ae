use serde::{Deserialize, Serialize};

use super::{check_dim, validate_contamination, Calibration, DetectError};

/// Gaussian envelope with empirical mean and ridge-regularized covariance.
/// Scores are squared Mahalanobis distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticEnvelope {
    pub contamination: f64,
    pub mean: Vec<f64>,
    /// Lower-triangular Cholesky factor of the covariance, row-major d × d.
    chol: Vec<f64>,
    pub ridge: f64,
    calibration: Calibration,
}

fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let v = a[i * d + i] - s;
                if v.is_nan() || v <= 0.0 || !v.is_finite() {
                    return None;
                }
                l[i * d + i] = v.sqrt();
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Some(l)
}

impl EllipticEnvelope {
    pub fn fit(train: &[Vec<f64>], contamination: f64) -> Result<Self, DetectError> {
        validate_contamination(contamination)?;
        if train.is_empty() {
            return Err(DetectError::EmptyTrainSet);
        }
        let d = train[0].len();
        for row in train {
            check_dim(d, row.len())?;
        }
        let n = train.len() as f64;
        let mut mean = vec![0.0; d];
        for row in train {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut cov = vec![0.0; d * d];
        for row in train {
            for i in 0..d {
                let di = row[i] - mean[i];
                for j in 0..=i {
                    cov[i * d + j] += di * (row[j] - mean[j]) / n;
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                cov[j * d + i] = cov[i * d + j];
            }
        }
        let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
        let ridge = 1e-6 * trace / d.max(1) as f64;
        for i in 0..d {
            cov[i * d + i] += ridge;
        }
        let chol = cholesky(&cov, d).ok_or(DetectError::DegenerateCovariance)?;
        let mut model = Self { contamination, mean, chol, ridge, calibration: Calibration::new(Vec::new()) };
        let scores = train.iter().map(|x| model.mahalanobis_sq(x)).collect();
        model.calibration = Calibration::new(scores);
        Ok(model)
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        // forward solve L y = x - mu
        let mut y = vec![0.0; d];
        for i in 0..d {
            let s: f64 = (0..i).map(|k| self.chol[i * d + k] * y[k]).sum();
            y[i] = (x[i] - self.mean[i] - s) / self.chol[i * d + i];
        }
        y.iter().map(|v| v * v).sum()
    }

    pub fn score(&self, x: &[f64]) -> Result<f64, DetectError> {
        check_dim(self.n_features(), x.len())?;
        Ok(self.mahalanobis_sq(x))
    }

    pub fn threshold(&self) -> f64 {
        self.calibration.threshold(self.contamination)
    }

    pub fn threshold_at(&self, contamination: f64) -> f64 {
        self.calibration.threshold(contamination)
    }

    pub fn training_scores(&self) -> &[f64] {
        self.calibration.training_scores()
    }

    pub fn vote(&self, x: &[f64]) -> Result<bool, DetectError> {
        Ok(self.score(x)? > self.threshold())
    }
}
