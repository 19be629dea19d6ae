//! The two comparison systems, run over the same prepared data.

use super::config::{RunConfig, System};
use super::operator::AcceptanceTally;
use super::prepare::{BaselineInputs, Prepared};
use super::results::SystemRun;
use crate::baselines::{
    baseline1_score, calibrate_threshold_once, MemberOutputs, RuleState, StaticEnsemble, STATIC_WEIGHTS,
};
use crate::error::Result;
use crate::metrics::{roc_auc, ConfusionCounts, IterationReport, PolicySnapshot};

/// ρ the comparison systems start from.
pub const BASELINE_RHO: f64 = 0.32;

fn static_tau(p: &Prepared, b: &BaselineInputs) -> Result<f64> {
    let thr = p.bank.thresholds_at(BASELINE_RHO)?[0];
    let scores: Vec<f64> = b
        .calib
        .iter()
        .map(|m| baseline1_score(&b.scaling.scores(m.ocsvm_raw, m.iforest, thr, m.seq_prob), &STATIC_WEIGHTS))
        .collect();
    let labels: Vec<bool> = p.calib.iter().map(|s| s.label).collect();
    Ok(calibrate_threshold_once(&scores, &labels)?)
}

fn latency_samples(b: &BaselineInputs, warmup: usize) -> Vec<f64> {
    let warm = b.test_ns.get(warmup..).filter(|w| !w.is_empty()).unwrap_or(&b.test_ns);
    warm.iter().map(|&ns| ns as f64 / 1e6).collect()
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

struct Scored {
    report: IterationReport,
    preds: Vec<bool>,
}

fn score_iteration(
    iteration: usize,
    outputs: &[MemberOutputs],
    labels: &[bool],
    model: &StaticEnsemble,
    iforest_thr: f64,
    latency: f64,
    first_f1: Option<f64>,
) -> Result<Scored> {
    let scores: Vec<f64> = outputs.iter().map(|m| model.score(m, iforest_thr)).collect();
    let preds: Vec<bool> = scores.iter().map(|&s| s > model.tau).collect();
    let c = ConfusionCounts::from_predictions(&preds, labels)?;
    let f1 = c.f1();
    let report = IterationReport {
        iteration,
        f1,
        precision: c.precision(),
        recall: c.recall(),
        accuracy: c.accuracy(),
        roc_auc: roc_auc(&scores, labels)?,
        delta_f1: f1 - first_f1.unwrap_or(f1),
        latency_ms: latency,
        policy: PolicySnapshot { w1: model.weights[0], w2: model.weights[1], rho: model.rho, tau: model.tau },
    };
    Ok(Scored { report, preds })
}

fn finish(
    system: System,
    p: &Prepared,
    reports: Vec<IterationReport>,
    predictions: Vec<Vec<bool>>,
    samples: Vec<f64>,
) -> SystemRun {
    let latencies = vec![samples; reports.len()];
    SystemRun {
        system,
        variant: "full".into(),
        dataset: p.dataset.clone(),
        seed: p.seed,
        reports,
        trace: Vec::new(),
        cloud: Vec::new(),
        acceptance: AcceptanceTally::default(),
        predictions,
        latencies,
    }
}

/// Fixed weights, ρ and τ calibrated once. Every iteration recomputes the
/// same predictions.
pub fn run_baseline1(p: &Prepared, cfg: &RunConfig) -> Result<SystemRun> {
    let b = p.baseline_inputs()?;
    let labels = p.test_labels();
    let samples = latency_samples(b, cfg.latency_warmup);
    let latency = mean(&samples);
    let mut reports: Vec<IterationReport> = Vec::new();
    let mut predictions = Vec::new();
    for it in 1..=cfg.iterations {
        let model =
            StaticEnsemble { weights: STATIC_WEIGHTS, tau: static_tau(p, b)?, rho: BASELINE_RHO, scaling: b.scaling };
        let thr = p.bank.thresholds_at(model.rho)?[0];
        let first = reports.first().map(|r| r.f1);
        let s = score_iteration(it, &b.test, &labels, &model, thr, latency, first)?;
        reports.push(s.report);
        predictions.push(s.preds);
    }
    Ok(finish(System::Baseline1, p, reports, predictions, samples))
}

/// Rule-based adaptation: after each iteration ρ, τ and the member weights
/// move by fixed rules on that iteration's metrics.
pub fn run_baseline2(p: &Prepared, cfg: &RunConfig) -> Result<SystemRun> {
    let b = p.baseline_inputs()?;
    let labels = p.test_labels();
    let samples = latency_samples(b, cfg.latency_warmup);
    let latency = mean(&samples);
    let mut state = RuleState::new(BASELINE_RHO, static_tau(p, b)?);
    let mut reports: Vec<IterationReport> = Vec::new();
    let mut predictions = Vec::new();
    for it in 1..=cfg.iterations {
        let model = StaticEnsemble { weights: state.weights, tau: state.tau, rho: state.rho, scaling: b.scaling };
        let thr = p.bank.thresholds_at(state.rho)?[0];
        let first = reports.first().map(|r| r.f1);
        let s = score_iteration(it, &b.test, &labels, &model, thr, latency, first)?;
        let mut member_f1 = [0.0; 3];
        for (j, f) in member_f1.iter_mut().enumerate() {
            let votes: Vec<bool> = b.test.iter().map(|m| m.votes(thr)[j]).collect();
            *f = ConfusionCounts::from_predictions(&votes, &labels)?.f1();
        }
        state = state.advance(s.report.f1, s.report.precision, s.report.recall, &member_f1);
        reports.push(s.report);
        predictions.push(s.preds);
    }
    Ok(finish(System::Baseline2, p, reports, predictions, samples))
}
