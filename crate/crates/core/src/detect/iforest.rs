use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_dim, validate_contamination, Calibration, DetectError};

/// H(i) = 1 + 1/2 + ... + 1/i, exact summation.
pub fn harmonic(i: usize) -> f64 {
    (1..=i).map(|k| 1.0 / k as f64).sum()
}

/// c(n) = 2 H(n-1) - 2 (n-1)/n: average unsuccessful-search path length in
/// a binary search tree of `n` points. c(0) = c(1) = 0.
pub fn average_path_length(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let nf = n as f64;
    2.0 * harmonic(n - 1) - 2.0 * (nf - 1.0) / nf
}

/// 2^(-E[h] / c(n)).
pub fn if_score_from_path(mean_path: f64, c_n: f64) -> f64 {
    if c_n <= 0.0 {
        return 0.5;
    }
    (-mean_path / c_n).exp2()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Internal { feature: usize, split: f64, left: usize, right: usize },
    Leaf { size: usize },
}

/// One isolation tree, stored as a flat node arena (root at 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<Node>,
}

impl IsolationTree {
    fn build(data: &[Vec<f64>], idx: &[usize], height_limit: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = Self { nodes: Vec::new() };
        tree.grow(data, idx.to_vec(), 0, height_limit, rng);
        tree
    }

    fn grow(&mut self, data: &[Vec<f64>], idx: Vec<usize>, depth: usize, limit: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { size: idx.len() });
        if depth >= limit || idx.len() <= 1 {
            return id;
        }
        let d = data[idx[0]].len();
        // features with spread inside this node
        let ranges: Vec<(usize, f64, f64)> = (0..d)
            .filter_map(|j| {
                let (lo, hi) = idx
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(data[i][j]), hi.max(data[i][j])));
                (hi > lo).then_some((j, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        let mut split = rng.random_range(lo..hi);
        if split <= lo {
            split = lo + (hi - lo) * 0.5;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| data[i][feature] < split);
        let left = self.grow(data, l, depth + 1, limit, rng);
        let right = self.grow(data, r, depth + 1, limit, rng);
        self.nodes[id] = Node::Internal { feature, split, left, right };
        id
    }

    /// Path length h(x): edges traversed plus c(size) at the terminal leaf.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0.0;
        loop {
            match &self.nodes[node] {
                Node::Internal { feature, split, left, right } => {
                    node = if x[*feature] < *split { *left } else { *right };
                    depth += 1.0;
                }
                Node::Leaf { size } => return depth + average_path_length(*size),
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Internal { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    pub trees: Vec<IsolationTree>,
    pub subsample_size: usize,
    pub n_features: usize,
    pub contamination: f64,
    pub c_n: f64,
    pub seed: u64,
    pub calibration: Calibration,
}

impl IsolationForest {
    pub fn fit(
        train: &[Vec<f64>],
        contamination: f64,
        n_trees: usize,
        max_samples: usize,
        seed: u64,
    ) -> Result<Self, DetectError> {
        if train.is_empty() {
            return Err(DetectError::EmptyTrainSet);
        }
        validate_contamination(contamination)?;
        let n_features = train[0].len();
        for row in train {
            check_dim(n_features, row.len())?;
        }
        let psi = max_samples.clamp(1, train.len());
        let height_limit = (psi as f64).log2().ceil().max(0.0) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..n_trees.max(1))
            .map(|_| {
                let idx = sample(&mut rng, train.len(), psi).into_vec();
                IsolationTree::build(train, &idx, height_limit, &mut rng)
            })
            .collect();
        let mut model = Self {
            trees,
            subsample_size: psi,
            n_features,
            contamination,
            c_n: average_path_length(psi),
            seed,
            calibration: Calibration::new(Vec::new()),
        };
        let scores = train.iter().map(|x| model.score_unchecked(x)).collect();
        model.calibration = Calibration::new(scores);
        Ok(model)
    }

    pub fn mean_path_length(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        if_score_from_path(self.mean_path_length(x), self.c_n)
    }

    /// Anomaly score a1 in (0, 1).
    pub fn score(&self, x: &[f64]) -> Result<f64, DetectError> {
        check_dim(self.n_features, x.len())?;
        Ok(self.score_unchecked(x))
    }

    pub fn threshold(&self) -> f64 {
        self.calibration.threshold(self.contamination)
    }

    pub fn threshold_at(&self, contamination: f64) -> f64 {
        self.calibration.threshold(contamination)
    }

    pub fn vote(&self, x: &[f64]) -> Result<bool, DetectError> {
        Ok(self.score(x)? > self.threshold())
    }
}
