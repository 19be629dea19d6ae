use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::operator::SimulatedOperator;
use crate::baselines::SequenceScorerConfig;
use crate::detect::EnsembleConfig;
use crate::error::{Error, Result};
use crate::evolve::PpoConfig;
use crate::neural::TrainConfig;
use crate::rul::RulConfig;

pub const DEFAULT_SEEDS: [u64; 3] = [42, 123, 456];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Semas,
    Baseline1,
    Baseline2,
}

impl System {
    pub const ALL: [System; 3] = [System::Semas, System::Baseline1, System::Baseline2];

    pub fn name(self) -> &'static str {
        match self {
            System::Semas => "semas",
            System::Baseline1 => "baseline1",
            System::Baseline2 => "baseline2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "semas" => Ok(System::Semas),
            "baseline1" | "b1" => Ok(System::Baseline1),
            "baseline2" | "b2" => Ok(System::Baseline2),
            other => Err(Error::Config(format!("unknown system `{other}`"))),
        }
    }
}

/// Component switches. All off is the full system.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    pub no_ppo: bool,
    pub no_consensus: bool,
    pub no_federated: bool,
    pub no_response: bool,
}

impl Ablation {
    pub const SWITCHES: [&'static str; 4] = ["no_ppo", "no_consensus", "no_federated", "no_response"];

    pub fn full() -> Self {
        Self::default()
    }

    pub fn only(switch: &str) -> Result<Self> {
        let mut a = Self::default();
        a.set(switch)?;
        Ok(a)
    }

    pub fn set(&mut self, switch: &str) -> Result<()> {
        match switch.trim().replace('-', "_").as_str() {
            "no_ppo" => self.no_ppo = true,
            "no_consensus" => self.no_consensus = true,
            "no_federated" => self.no_federated = true,
            "no_response" => self.no_response = true,
            "" | "full" => {}
            other => return Err(Error::Config(format!("unknown ablation switch `{other}`"))),
        }
        Ok(())
    }

    /// Comma-separated switch list, e.g. `no_ppo,no_response`.
    pub fn parse_list(s: &str) -> Result<Self> {
        let mut a = Self::default();
        for part in s.split(',') {
            a.set(part)?;
        }
        Ok(a)
    }

    /// `full` or the active switches joined by `+`.
    pub fn label(&self) -> String {
        let on = [self.no_ppo, self.no_consensus, self.no_federated, self.no_response];
        let names: Vec<&str> = Self::SWITCHES.iter().zip(on).filter(|(_, b)| *b).map(|(n, _)| *n).collect();
        if names.is_empty() {
            "full".into()
        } else {
            names.join("+")
        }
    }
}

/// Offset injected into the test stream from its midpoint onward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    /// In units of each affected feature's standard deviation.
    pub magnitude: f64,
    /// Every `stride`-th feature is shifted.
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Profile name (`boiler`, `wind`) or a path to a labelled CSV.
    pub dataset: String,
    pub system: System,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub ablation: Ablation,
    pub out: Option<PathBuf>,
    /// Overrides the profile's sample count.
    pub n_samples: Option<usize>,
    /// Share of the training split held out for threshold calibration.
    pub calibration_fraction: f64,
    pub shift: Option<Shift>,
    pub fog_instances: usize,
    pub ppo: PpoConfig,
    pub ppo_rounds_per_iter: usize,
    /// Latency fed to the reward, in ms.
    pub reward_latency_ms: f64,
    pub shapley_features: usize,
    pub surrogate_rounds: usize,
    pub validation_windows: usize,
    /// Multiplies Cloud-side processing time by sleeping; 1 is no slowdown.
    pub cloud_slowdown: f64,
    /// Leading samples excluded from the latency mean.
    pub latency_warmup: usize,
    pub ensemble: EnsembleConfig,
    pub rul: RulConfig,
    pub sequence: SequenceScorerConfig,
    pub operator: SimulatedOperator,
    pub parallel_seeds: bool,
    pub queue_capacity: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: "boiler".into(),
            system: System::Semas,
            seeds: DEFAULT_SEEDS.to_vec(),
            iterations: 3,
            ablation: Ablation::default(),
            out: None,
            n_samples: None,
            calibration_fraction: 0.2,
            shift: None,
            fog_instances: 2,
            ppo: PpoConfig::default(),
            ppo_rounds_per_iter: 10,
            reward_latency_ms: 1.0,
            shapley_features: 8,
            surrogate_rounds: 40,
            validation_windows: 5,
            cloud_slowdown: 1.0,
            latency_warmup: 50,
            ensemble: EnsembleConfig::default(),
            rul: RulConfig { epochs: 4, max_train_sequences: Some(256), ..RulConfig::default() },
            sequence: SequenceScorerConfig {
                max_sequences: 512,
                train: TrainConfig { epochs: 20, patience: 5, ..SequenceScorerConfig::default().train },
                ..SequenceScorerConfig::default()
            },
            operator: SimulatedOperator::default(),
            parallel_seeds: true,
            queue_capacity: crate::bus::DEFAULT_QUEUE_CAPACITY,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.seeds.is_empty() {
            return bad("seeds must be non-empty");
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if self.fog_instances == 0 {
            return bad("fog_instances must be at least 1");
        }
        if !(self.calibration_fraction > 0.0 && self.calibration_fraction < 1.0) {
            return bad("calibration_fraction must lie in (0, 1)");
        }
        if !(self.cloud_slowdown.is_finite() && self.cloud_slowdown >= 1.0) {
            return bad("cloud_slowdown must be >= 1");
        }
        if self.validation_windows < 2 {
            return bad("validation_windows must be at least 2");
        }
        if !(self.reward_latency_ms.is_finite() && self.reward_latency_ms >= 0.0) {
            return bad("reward_latency_ms must be finite and non-negative");
        }
        if let Some(s) = self.shift {
            if !s.magnitude.is_finite() || s.stride == 0 {
                return bad("shift needs a finite magnitude and a positive stride");
            }
        }
        self.ppo.validate()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
