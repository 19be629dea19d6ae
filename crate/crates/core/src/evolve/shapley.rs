//! Exact Shapley attribution and the stump surrogate it explains.

use serde::{Deserialize, Serialize};

use super::EvolveError;

pub const MAX_EXACT_FEATURES: usize = 12;
pub const EFFICIENCY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyReport {
    /// Indices (into the full feature vector) that were attributed.
    pub features: Vec<usize>,
    pub phi: Vec<f64>,
    pub f_full: f64,
    pub f_empty: f64,
    /// Σφ − (f(F) − f(∅))
    pub efficiency_residual: f64,
    pub valid: bool,
}

/// Exact Shapley values of `model` at `instance` over the features in
/// `feature_set`. Features of the set outside a coalition take their
/// `baseline` value; features not in the set keep the instance value.
pub fn shapley_exact<F>(
    model: F,
    baseline: &[f64],
    instance: &[f64],
    feature_set: &[usize],
) -> Result<ShapleyReport, EvolveError>
where
    F: Fn(&[f64]) -> f64,
{
    let m = feature_set.len();
    if m > MAX_EXACT_FEATURES {
        return Err(EvolveError::TooManyFeatures { max: MAX_EXACT_FEATURES, got: m });
    }
    if baseline.len() != instance.len() {
        return Err(EvolveError::LengthMismatch { expected: instance.len(), got: baseline.len() });
    }
    if let Some(&bad) = feature_set.iter().find(|&&f| f >= instance.len()) {
        return Err(EvolveError::LengthMismatch { expected: instance.len(), got: bad + 1 });
    }

    let n_sub = 1usize << m;
    let mut x = instance.to_vec();
    let mut value = vec![0.0; n_sub];
    for (mask, v) in value.iter_mut().enumerate() {
        for (j, &f) in feature_set.iter().enumerate() {
            x[f] = if mask >> j & 1 == 1 { instance[f] } else { baseline[f] };
        }
        *v = model(&x);
    }

    // w(s) = s!(m−s−1)!/m!
    let mut fact = vec![1.0f64; m + 1];
    for k in 1..=m {
        fact[k] = fact[k - 1] * k as f64;
    }
    let weight: Vec<f64> = (0..m).map(|s| fact[s] * fact[m - s - 1] / fact[m]).collect();

    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        for mask in 0..n_sub {
            if mask & bit == 0 {
                *p += weight[mask.count_ones() as usize] * (value[mask | bit] - value[mask]);
            }
        }
    }
    let f_full = value[n_sub - 1];
    let f_empty = value[0];
    let residual = phi.iter().sum::<f64>() - (f_full - f_empty);
    Ok(ShapleyReport {
        features: feature_set.to_vec(),
        phi,
        f_full,
        f_empty,
        efficiency_residual: residual,
        valid: residual.abs() <= EFFICIENCY_TOL,
    })
}

/// Up to `k` feature indices ranked by |Pearson correlation| with `target`.
/// Constant columns are never chosen.
pub fn select_features(rows: &[Vec<f64>], target: &[f64], k: usize) -> Vec<usize> {
    if rows.is_empty() || rows.len() != target.len() {
        return Vec::new();
    }
    let d = rows[0].len();
    let n = rows.len() as f64;
    let ty = target.iter().sum::<f64>() / n;
    let vy: f64 = target.iter().map(|y| (y - ty).powi(2)).sum();
    let mut scored: Vec<(usize, f64)> = (0..d)
        .filter_map(|j| {
            let mx = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let vx: f64 = rows.iter().map(|r| (r[j] - mx).powi(2)).sum();
            if vx <= 1e-12 {
                return None;
            }
            let cov: f64 = rows.iter().zip(target).map(|(r, y)| (r[j] - mx) * (y - ty)).sum();
            let c = if vy > 0.0 { (cov / (vx * vy).sqrt()).abs() } else { 0.0 };
            Some((j, if c.is_finite() { c } else { 0.0 }))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.into_iter().take(k).map(|(j, _)| j).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

impl Stump {
    pub fn predict(&self, x: &[f64]) -> f64 {
        if x[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

/// Additive ensemble of depth-1 trees fitted by least-squares boosting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StumpEnsemble {
    pub base: f64,
    pub stumps: Vec<Stump>,
}

impl StumpEnsemble {
    /// Boosts `rounds` stumps restricted to `features`, with learning rate
    /// `lr` and up to 16 quantile split candidates per feature.
    pub fn fit(
        rows: &[Vec<f64>],
        target: &[f64],
        features: &[usize],
        rounds: usize,
        lr: f64,
    ) -> Result<Self, EvolveError> {
        if rows.is_empty() {
            return Err(EvolveError::EmptyBuffer);
        }
        if rows.len() != target.len() {
            return Err(EvolveError::LengthMismatch { expected: rows.len(), got: target.len() });
        }
        let n = rows.len();
        let base = target.iter().sum::<f64>() / n as f64;
        let mut resid: Vec<f64> = target.iter().map(|y| y - base).collect();
        let candidates: Vec<(usize, Vec<f64>)> = features
            .iter()
            .map(|&f| {
                let mut col: Vec<f64> = rows.iter().map(|r| r[f]).collect();
                col.sort_by(f64::total_cmp);
                let mut cuts: Vec<f64> = (1..16).map(|q| col[(q * (n - 1)) / 16]).collect();
                cuts.dedup();
                (f, cuts)
            })
            .collect();
        let mut stumps = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            let mut best: Option<(f64, Stump)> = None;
            for (f, cuts) in &candidates {
                for &c in cuts {
                    let (mut sl, mut nl, mut sr, mut nr) = (0.0, 0usize, 0.0, 0usize);
                    for (r, e) in rows.iter().zip(&resid) {
                        if r[*f] <= c {
                            sl += e;
                            nl += 1;
                        } else {
                            sr += e;
                            nr += 1;
                        }
                    }
                    if nl == 0 || nr == 0 {
                        continue;
                    }
                    // reduction in squared error from fitting both means
                    let gain = sl * sl / nl as f64 + sr * sr / nr as f64;
                    if best.as_ref().is_none_or(|(g, _)| gain > *g) {
                        let s =
                            Stump { feature: *f, threshold: c, left: lr * sl / nl as f64, right: lr * sr / nr as f64 };
                        best = Some((gain, s));
                    }
                }
            }
            let Some((_, s)) = best else { break };
            for (r, e) in rows.iter().zip(resid.iter_mut()) {
                *e -= s.predict(r);
            }
            stumps.push(s);
        }
        Ok(Self { base, stumps })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base + self.stumps.iter().map(|s| s.predict(x)).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn additive_model() {
        let r = shapley_exact(|x| x[0] + x[1], &[0.0, 0.0], &[2.0, 3.0], &[0, 1]).unwrap();
        assert_abs_diff_eq!(r.phi[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.phi[1], 3.0, epsilon = 1e-12);
        assert!(r.valid);
    }

    #[test]
    fn constant_model() {
        let r = shapley_exact(|_| 4.2, &[0.0; 3], &[1.0, 2.0, 3.0], &[0, 1, 2]).unwrap();
        assert!(r.phi.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn symmetric_features_share_credit() {
        let r = shapley_exact(|x| x[0] * x[1] + x[2], &[0.0; 3], &[1.5, 1.5, 0.3], &[0, 1, 2]).unwrap();
        assert_abs_diff_eq!(r.phi[0], r.phi[1], epsilon = 1e-12);
        assert_abs_diff_eq!(r.phi[0], 1.125, epsilon = 1e-12);
    }

    #[test]
    fn too_many_features() {
        let x = vec![0.0; 13];
        let set: Vec<usize> = (0..13).collect();
        assert_eq!(
            shapley_exact(|_| 0.0, &x, &x, &set).unwrap_err(),
            EvolveError::TooManyFeatures { max: 12, got: 13 }
        );
    }

    #[test]
    fn stumps_fit_step_function() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64, ((i * 7) % 11) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| if r[0] > 49.0 { 1.0 } else { 0.0 }).collect();
        let feats = select_features(&rows, &y, 1);
        assert_eq!(feats, vec![0]);
        let m = StumpEnsemble::fit(&rows, &y, &feats, 60, 0.3).unwrap();
        let err: f64 = rows.iter().zip(&y).map(|(r, t)| (m.predict(r) - t).abs()).sum::<f64>() / 100.0;
        assert!(err < 0.05, "{err}");
    }
}
