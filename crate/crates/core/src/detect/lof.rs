use serde::{Deserialize, Serialize};

use super::{check_dim, sq_dist, validate_contamination, Calibration, DetectError};

/// Added to the mean reachability distance before inverting.
pub const LOF_EPS: f64 = 1e-10;

/// Brute-force Local Outlier Factor in novelty mode: queries are scored
/// against the stored training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalOutlierFactor {
    pub k: usize,
    pub contamination: f64,
    train: Vec<Vec<f64>>,
    k_distance: Vec<f64>,
    lrd: Vec<f64>,
    calibration: Calibration,
}

// (index, distance) of the k nearest training points, skipping `exclude`.
fn knn(train: &[Vec<f64>], x: &[f64], k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
    let mut d: Vec<(usize, f64)> =
        train.iter().enumerate().filter(|(i, _)| Some(*i) != exclude).map(|(i, t)| (i, sq_dist(t, x).sqrt())).collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if d.len() > k {
        d.select_nth_unstable_by(k - 1, cmp);
        d.truncate(k);
    }
    d.sort_by(cmp);
    d
}

impl LocalOutlierFactor {
    pub fn fit(train: &[Vec<f64>], k: usize, contamination: f64) -> Result<Self, DetectError> {
        validate_contamination(contamination)?;
        if train.len() <= k || k == 0 {
            return Err(DetectError::TooFewNeighbors { k, n: train.len() });
        }
        let d = train[0].len();
        for row in train {
            check_dim(d, row.len())?;
        }
        let neighbors: Vec<Vec<(usize, f64)>> = (0..train.len()).map(|i| knn(train, &train[i], k, Some(i))).collect();
        let k_distance: Vec<f64> = neighbors.iter().map(|nb| nb[k - 1].1).collect();
        let lrd_of = |nb: &[(usize, f64)]| {
            let mean = nb.iter().map(|&(o, dist)| dist.max(k_distance[o])).sum::<f64>() / nb.len() as f64;
            1.0 / (mean + LOF_EPS)
        };
        let lrd: Vec<f64> = neighbors.iter().map(|nb| lrd_of(nb)).collect();
        let scores: Vec<f64> = neighbors
            .iter()
            .zip(&lrd)
            .map(|(nb, &l)| nb.iter().map(|&(o, _)| lrd[o]).sum::<f64>() / (nb.len() as f64 * l))
            .collect();
        Ok(Self { k, contamination, train: train.to_vec(), k_distance, lrd, calibration: Calibration::new(scores) })
    }

    pub fn n_features(&self) -> usize {
        self.train[0].len()
    }

    /// LOF score of a query; ≈ 1 inside uniform density, ≫ 1 for outliers.
    pub fn score(&self, x: &[f64]) -> Result<f64, DetectError> {
        check_dim(self.n_features(), x.len())?;
        let nb = knn(&self.train, x, self.k, None);
        let mean_reach = nb.iter().map(|&(o, dist)| dist.max(self.k_distance[o])).sum::<f64>() / nb.len() as f64;
        let lrd_x = 1.0 / (mean_reach + LOF_EPS);
        Ok(nb.iter().map(|&(o, _)| self.lrd[o]).sum::<f64>() / (nb.len() as f64 * lrd_x))
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

/// Fit on `train` and vote on `z` in one call. Returns (vote, score).
pub fn lof_vote(train: &[Vec<f64>], k: usize, contamination: f64, z: &[f64]) -> Result<(bool, f64), DetectError> {
    let m = LocalOutlierFactor::fit(train, k, contamination)?;
    let s = m.score(z)?;
    Ok((s > m.threshold(), s))
}
