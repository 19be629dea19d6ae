use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use serde::Serialize;

use super::config::{RunConfig, Shift};
use crate::baselines::{calibrate_threshold_once, MemberOutputs, MemberScaling, SequenceScorer, SequenceScorerConfig};
use crate::datagen::{
    feature_names, generate, generated_schema, ingest_csv, inject_shift, stratified_split, DatasetProfile,
    LabeledSample, Standardizer,
};
use crate::detect::{EnsembleBank, EnsembleConfig, MemberScores};
use crate::error::{Error, Result};
use crate::evolve::{MemberThresholds, ScorePath, Tunables, INITIAL_RHO, INITIAL_W1};
use crate::rul::{build_sequences, rul_train, RulConfig, RulModel};

/// Inputs of the three-member comparison systems.
#[derive(Debug, Clone)]
pub struct BaselineInputs {
    pub calib: Vec<MemberOutputs>,
    pub test: Vec<MemberOutputs>,
    /// Wall time to produce each test sample's member outputs.
    pub test_ns: Vec<u64>,
    pub scaling: MemberScaling,
}

/// Everything a run needs that depends only on (data, seed): standardized
/// splits, the fitted detector bank and cached member scores. Neural
/// members are trained on first use.
#[derive(Debug)]
pub struct Prepared {
    pub dataset: String,
    pub seed: u64,
    pub feature_names: Vec<String>,
    /// Training rows used to fit models.
    pub fit: Vec<LabeledSample>,
    /// Held-out training rows used to calibrate thresholds.
    pub calib: Vec<LabeledSample>,
    /// Test stream in time order, shift applied.
    pub test: Vec<LabeledSample>,
    pub bank: EnsembleBank,
    pub thresholds: MemberThresholds,
    pub calib_raw: Vec<MemberScores>,
    pub test_raw: Vec<MemberScores>,
    pub test_raw_ns: Vec<u64>,
    sequence_cfg: SequenceScorerConfig,
    rul_cfg: RulConfig,
    sequence: OnceLock<SequenceScorer>,
    baseline: OnceLock<BaselineInputs>,
    rul: OnceLock<RulModel>,
}

fn rows(s: &[LabeledSample]) -> Vec<Vec<f64>> {
    s.iter().map(|x| x.features.clone()).collect()
}

fn labels(s: &[LabeledSample]) -> Vec<bool> {
    s.iter().map(|x| x.label).collect()
}

fn load_samples(cfg: &RunConfig, seed: u64) -> Result<(Vec<LabeledSample>, Vec<String>, f64)> {
    if cfg.dataset.to_ascii_lowercase().ends_with(".csv") {
        let report = ingest_csv(&cfg.dataset, &generated_schema())?;
        for w in &report.warnings {
            log::warn!("{}: {w}", cfg.dataset);
        }
        if !report.rejects.is_empty() {
            log::warn!("{}: skipped {} malformed rows", cfg.dataset, report.rejects.len());
        }
        let mut samples = report.samples;
        if let Some(n) = cfg.n_samples {
            samples.truncate(n);
        }
        return Ok((samples, report.feature_names, 0.8));
    }
    let mut profile = DatasetProfile::by_name(&cfg.dataset, seed)
        .ok_or_else(|| Error::Config(format!("unknown dataset profile `{}`", cfg.dataset)))?;
    if let Some(n) = cfg.n_samples {
        profile.n_samples = n;
    }
    let samples = generate(&profile)?;
    Ok((samples, feature_names(profile.n_features), profile.train_fraction))
}

fn score_all(bank: &EnsembleBank, rows: &[Vec<f64>]) -> Result<(Vec<MemberScores>, Vec<u64>)> {
    let mut out = Vec::with_capacity(rows.len());
    let mut ns = Vec::with_capacity(rows.len());
    for r in rows {
        let t0 = Instant::now();
        out.push(bank.raw_scores(r)?);
        ns.push(t0.elapsed().as_nanos() as u64);
    }
    Ok((out, ns))
}

impl Prepared {
    pub fn build(cfg: &RunConfig, seed: u64) -> Result<Self> {
        let (samples, names, train_fraction) = load_samples(cfg, seed)?;
        if samples.is_empty() {
            return Err(Error::Config(format!("dataset `{}` has no rows", cfg.dataset)));
        }
        let split = stratified_split(&samples, train_fraction, seed)?;
        let inner = stratified_split(&split.train, 1.0 - cfg.calibration_fraction, seed.wrapping_add(1))?;
        let mut test = split.test;
        if let Some(Shift { magnitude, stride }) = cfg.shift {
            let mid = test.len() / 2;
            inject_shift(&mut test, mid, magnitude, stride);
        }
        let std = Standardizer::fit_samples(&split.train);
        let fit = std.transform(&inner.train);
        let calib = std.transform(&inner.test);
        let test = std.transform(&test);

        let normal: Vec<Vec<f64>> = fit.iter().filter(|s| !s.label).map(|s| s.features.clone()).collect();
        let ens = EnsembleConfig { seed, ..cfg.ensemble.clone() };
        let bank = EnsembleBank::fit(&normal, &ens)?;
        let thresholds = MemberThresholds::from_bank(&bank)?;
        let (calib_raw, _) = score_all(&bank, &rows(&calib))?;
        let (test_raw, test_raw_ns) = score_all(&bank, &rows(&test))?;
        Ok(Self {
            dataset: cfg.dataset.clone(),
            seed,
            feature_names: names,
            fit,
            calib,
            test,
            bank,
            thresholds,
            calib_raw,
            test_raw,
            test_raw_ns,
            sequence_cfg: SequenceScorerConfig {
                train: crate::neural::TrainConfig { seed, ..cfg.sequence.train.clone() },
                ..cfg.sequence.clone()
            },
            rul_cfg: RulConfig { seed, ..cfg.rul.clone() },
            sequence: OnceLock::new(),
            baseline: OnceLock::new(),
            rul: OnceLock::new(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn test_rows(&self) -> Vec<Vec<f64>> {
        rows(&self.test)
    }

    pub fn test_labels(&self) -> Vec<bool> {
        labels(&self.test)
    }

    /// a2 for cached raw scores at contamination `rho`.
    pub fn vote_fraction(&self, raw: &MemberScores, rho: f64) -> f64 {
        let thr = self.thresholds.at(rho);
        raw.0.iter().zip(&thr).filter(|(s, t)| s > t).count() as f64 / 5.0
    }

    /// Starting tunables: default weights and contamination, τ chosen by F1
    /// on the calibration rows for the given score path and clamped to the
    /// valid range.
    pub fn initial_tunables(&self, path: ScorePath) -> Result<Tunables> {
        let t0 = Tunables::new(INITIAL_W1, INITIAL_RHO, 0.5);
        let scores: Vec<f64> =
            self.calib_raw.iter().map(|r| path.score(&t0, r.0[0], self.vote_fraction(r, t0.rho))).collect();
        let tau = calibrate_threshold_once(&scores, &labels(&self.calib))?;
        Ok(Tunables::new(INITIAL_W1, INITIAL_RHO, tau))
    }

    pub fn sequence_scorer(&self) -> Result<&SequenceScorer> {
        if let Some(s) = self.sequence.get() {
            return Ok(s);
        }
        let s = SequenceScorer::fit(&rows(&self.fit), &labels(&self.fit), &self.sequence_cfg)?;
        let _ = self.sequence.set(s);
        Ok(self.sequence.get().expect("just set"))
    }

    pub fn baseline_inputs(&self) -> Result<&BaselineInputs> {
        if let Some(b) = self.baseline.get() {
            return Ok(b);
        }
        let seq = self.sequence_scorer()?;
        let calib_rows = rows(&self.calib);
        let test_rows = rows(&self.test);
        let mut calib = Vec::with_capacity(calib_rows.len());
        for (i, r) in self.calib_raw.iter().enumerate() {
            calib.push(MemberOutputs { ocsvm_raw: r.0[1], iforest: r.0[0], seq_prob: seq.score_at(&calib_rows, i)? });
        }
        let mut test = Vec::with_capacity(test_rows.len());
        let mut test_ns = Vec::with_capacity(test_rows.len());
        for (i, r) in self.test_raw.iter().enumerate() {
            let t0 = Instant::now();
            let seq_prob = seq.score_at(&test_rows, i)?;
            test_ns.push(self.test_raw_ns[i] + t0.elapsed().as_nanos() as u64);
            test.push(MemberOutputs { ocsvm_raw: r.0[1], iforest: r.0[0], seq_prob });
        }
        let train = self.bank.training_scores()?;
        let scaling = MemberScaling::from_training(&train[1], &train[0]);
        let _ = self.baseline.set(BaselineInputs { calib, test, test_ns, scaling });
        Ok(self.baseline.get().expect("just set"))
    }

    pub fn rul_model(&self) -> Result<&RulModel> {
        if let Some(m) = self.rul.get() {
            return Ok(m);
        }
        let fit_rows = rows(&self.fit);
        let targets: Vec<Option<f64>> = self.fit.iter().map(|s| s.rul_hours).collect();
        let (xs, ys) = build_sequences(&fit_rows, &targets, self.rul_cfg.window);
        let mut model = RulModel::new(self.n_features(), &self.rul_cfg);
        rul_train(&mut model, &xs, &ys, &self.rul_cfg)?;
        let _ = self.rul.set(model);
        Ok(self.rul.get().expect("just set"))
    }
}

#[derive(Serialize)]
struct CacheKey<'a> {
    dataset: &'a str,
    n_samples: Option<usize>,
    seed: u64,
    calibration_fraction: f64,
    shift: Option<Shift>,
    ensemble: &'a EnsembleConfig,
    sequence: &'a SequenceScorerConfig,
    rul: &'a RulConfig,
}

/// Cache of [`Prepared`] data shared by every system and ablation run on
/// the same data and seed.
#[derive(Debug, Default)]
pub struct Workbench {
    cache: Mutex<HashMap<String, Arc<Prepared>>>,
}

impl Workbench {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn prepared(&self, cfg: &RunConfig, seed: u64) -> Result<Arc<Prepared>> {
        let key = serde_json::to_string(&CacheKey {
            dataset: &cfg.dataset,
            n_samples: cfg.n_samples,
            seed,
            calibration_fraction: cfg.calibration_fraction,
            shift: cfg.shift,
            ensemble: &cfg.ensemble,
            sequence: &cfg.sequence,
            rul: &cfg.rul,
        })?;
        if let Some(p) = self.cache.lock().expect("workbench cache poisoned").get(&key) {
            return Ok(Arc::clone(p));
        }
        let p = Arc::new(Prepared::build(cfg, seed)?);
        let mut cache = self.cache.lock().expect("workbench cache poisoned");
        Ok(Arc::clone(cache.entry(key).or_insert(p)))
    }

    pub fn len(&self) -> usize {
        self.cache.lock().expect("workbench cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
