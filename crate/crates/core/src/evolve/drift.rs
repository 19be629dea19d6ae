//! Two-sided Page–Hinkley change detector.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriftState {
    Stable,
    Drift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PageHinkleyConfig {
    /// Tolerated drift magnitude, in units of the warm-up standard deviation.
    pub delta: f64,
    /// Alarm threshold on the cumulative statistic.
    pub lambda: f64,
    /// Ticks used to estimate the input scale before testing starts.
    pub warmup: usize,
}

impl Default for PageHinkleyConfig {
    fn default() -> Self {
        Self { delta: 0.005, lambda: 100.0, warmup: 30 }
    }
}

/// Inputs are divided by the standard deviation of the first `warmup` ticks,
/// then the cumulative deviations from the running mean are tracked in both
/// directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageHinkley {
    pub cfg: PageHinkleyConfig,
    warm: Vec<f64>,
    scale: f64,
    n: usize,
    mean: f64,
    up: f64,
    up_min: f64,
    down: f64,
    down_max: f64,
    drift_at: Option<usize>,
    ticks: usize,
}

impl PageHinkley {
    pub fn new(cfg: PageHinkleyConfig) -> Self {
        Self {
            cfg,
            warm: Vec::new(),
            scale: 1.0,
            n: 0,
            mean: 0.0,
            up: 0.0,
            up_min: 0.0,
            down: 0.0,
            down_max: 0.0,
            drift_at: None,
            ticks: 0,
        }
    }

    pub fn update(&mut self, x: f64) -> DriftState {
        self.ticks += 1;
        if !x.is_finite() {
            return self.state();
        }
        if self.warm.len() < self.cfg.warmup {
            self.warm.push(x);
            if self.warm.len() == self.cfg.warmup {
                let n = self.warm.len() as f64;
                let m = self.warm.iter().sum::<f64>() / n;
                let sd = (self.warm.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
                self.scale = if sd > 1e-12 { sd } else { 1.0 };
                let warm = std::mem::take(&mut self.warm);
                for v in &warm {
                    self.step(*v);
                }
                self.warm = warm;
            }
            return self.state();
        }
        self.step(x);
        self.state()
    }

    fn step(&mut self, x: f64) {
        let z = x / self.scale;
        self.n += 1;
        self.mean += (z - self.mean) / self.n as f64;
        self.up += z - self.mean - self.cfg.delta;
        self.up_min = self.up_min.min(self.up);
        self.down += z - self.mean + self.cfg.delta;
        self.down_max = self.down_max.max(self.down);
        if self.drift_at.is_none() && self.statistic() > self.cfg.lambda {
            self.drift_at = Some(self.ticks);
        }
    }

    /// max(PH⁺, PH⁻)
    pub fn statistic(&self) -> f64 {
        (self.up - self.up_min).max(self.down_max - self.down)
    }

    pub fn state(&self) -> DriftState {
        if self.drift_at.is_some() {
            DriftState::Drift
        } else {
            DriftState::Stable
        }
    }

    /// Tick (1-based) at which the alarm first fired.
    pub fn drift_at(&self) -> Option<usize> {
        self.drift_at
    }

    pub fn ticks(&self) -> usize {
        self.ticks
    }

    /// Clears the statistics but keeps the configuration.
    pub fn reset(&mut self) {
        *self = Self::new(self.cfg);
    }
}

/// Runs a fresh detector over `stream`.
pub fn detect_drift(stream: &[f64], cfg: PageHinkleyConfig) -> DriftState {
    let mut ph = PageHinkley::new(cfg);
    for &x in stream {
        ph.update(x);
    }
    ph.state()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_stable() {
        assert_eq!(detect_drift(&[], PageHinkleyConfig::default()), DriftState::Stable);
    }

    #[test]
    fn constant_stream_is_stable() {
        assert_eq!(detect_drift(&[0.4; 2000], PageHinkleyConfig::default()), DriftState::Stable);
    }

    #[test]
    fn downward_step_detected() {
        let mut s = vec![0.0; 300];
        for (i, v) in s.iter_mut().enumerate() {
            *v = if i % 2 == 0 { 0.1 } else { -0.1 };
        }
        s.extend(std::iter::repeat_n(-0.3, 200));
        let mut ph = PageHinkley::new(PageHinkleyConfig::default());
        for &x in &s {
            ph.update(x);
        }
        assert!(ph.drift_at().unwrap() > 300);
    }
}
