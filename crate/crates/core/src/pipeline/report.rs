//! Report files written after a command finishes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::System;
use super::results::{ExperimentResults, SystemRun};
use crate::baselines::SEQUENCE_MEMBER;
use crate::error::Result;
use crate::metrics::{cohen_d, mean_ci95, welch_t, MeanCi};

pub const REPORT_FILES: [&str; 8] = [
    "iterations.csv",
    "summary.json",
    "table.txt",
    "trajectory.csv",
    "ablation.csv",
    "stats.csv",
    "timing.json",
    "trace.csv",
];

const FOOTER: &str = "Prediction horizon coverage is not reported.";

#[derive(Debug, Clone, Serialize)]
pub struct LabelSummary {
    pub label: String,
    pub system: System,
    pub variant: String,
    pub dataset: String,
    pub seeds: Vec<u64>,
    pub f1: MeanCi,
    pub precision: MeanCi,
    pub recall: MeanCi,
    pub accuracy: MeanCi,
    pub roc_auc: MeanCi,
    pub delta_f1: MeanCi,
    /// Pooled over seeds; `None` when no plans were raised.
    pub operator_acceptance: Option<f64>,
    pub plans: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub sequence_member: &'static str,
    pub systems: Vec<LabelSummary>,
    pub note: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairStat {
    pub a: String,
    pub b: String,
    pub t: f64,
    pub dof: f64,
    pub p: f64,
    pub cohen_d: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelTiming {
    pub label: String,
    pub latency_ms: MeanCi,
    /// Mean over seeds of each run's median per-sample latency.
    pub median_latency_ms: MeanCi,
}

fn final_metric(runs: &[&SystemRun], f: impl Fn(&crate::metrics::IterationReport) -> f64) -> Vec<f64> {
    runs.iter().filter_map(|r| r.final_report().map(&f)).collect()
}

pub fn summarize(results: &ExperimentResults) -> Summary {
    let systems = results
        .labels()
        .into_iter()
        .map(|label| {
            let runs = results.by_label(&label);
            let first = runs[0];
            let plans: usize = runs.iter().map(|r| r.acceptance.plans).sum();
            let accepted: usize = runs.iter().map(|r| r.acceptance.accepted).sum();
            LabelSummary {
                system: first.system,
                variant: first.variant.clone(),
                dataset: first.dataset.clone(),
                seeds: runs.iter().map(|r| r.seed).collect(),
                f1: mean_ci95(&final_metric(&runs, |r| r.f1)),
                precision: mean_ci95(&final_metric(&runs, |r| r.precision)),
                recall: mean_ci95(&final_metric(&runs, |r| r.recall)),
                accuracy: mean_ci95(&final_metric(&runs, |r| r.accuracy)),
                roc_auc: mean_ci95(&final_metric(&runs, |r| r.roc_auc)),
                delta_f1: mean_ci95(&final_metric(&runs, |r| r.delta_f1)),
                operator_acceptance: (plans > 0).then(|| accepted as f64 / plans as f64),
                plans,
                label,
            }
        })
        .collect();
    Summary { sequence_member: SEQUENCE_MEMBER, systems, note: FOOTER }
}

/// Welch test and effect size on final F1 for every pair of labels.
pub fn pairwise_stats(results: &ExperimentResults) -> Vec<PairStat> {
    let labels = results.labels();
    let finals: Vec<Vec<f64>> = labels.iter().map(|l| final_metric(&results.by_label(l), |r| r.f1)).collect();
    let mut out = Vec::new();
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            let (t, dof, p) = match welch_t(&finals[i], &finals[j]) {
                Ok(w) => (w.t, w.dof, w.p),
                Err(_) => (f64::NAN, f64::NAN, f64::NAN),
            };
            out.push(PairStat {
                a: labels[i].clone(),
                b: labels[j].clone(),
                t,
                dof,
                p,
                cohen_d: cohen_d(&finals[i], &finals[j]).unwrap_or(f64::NAN),
            });
        }
    }
    out
}

pub fn timings(results: &ExperimentResults) -> Vec<LabelTiming> {
    results
        .labels()
        .into_iter()
        .map(|label| {
            let runs = results.by_label(&label);
            let lat = final_metric(&runs, |r| r.latency_ms);
            let med: Vec<f64> = runs.iter().map(|r| r.median_latency_ms()).collect();
            LabelTiming { latency_ms: mean_ci95(&lat), median_latency_ms: mean_ci95(&med), label }
        })
        .collect()
}

fn table(summary: &Summary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "sequence member: {}", summary.sequence_member);
    let _ = writeln!(
        s,
        "{:<34} {:>5} {:>16} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "system", "seeds", "F1 (95% CI)", "prec", "recall", "acc", "auc", "dF1"
    );
    for r in &summary.systems {
        let _ = writeln!(
            s,
            "{:<34} {:>5} {:>6.4} ±{:<8.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>+9.4}",
            r.label,
            r.seeds.len(),
            r.f1.mean,
            (r.f1.upper - r.f1.lower) / 2.0,
            r.precision.mean,
            r.recall.mean,
            r.accuracy.mean,
            r.roc_auc.mean,
            r.delta_f1.mean,
        );
    }
    let _ = writeln!(s, "{FOOTER}");
    s
}

fn write_csv<T: Serialize>(path: PathBuf, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct IterRow<'a> {
    label: &'a str,
    dataset: &'a str,
    seed: u64,
    iteration: usize,
    f1: f64,
    precision: f64,
    recall: f64,
    accuracy: f64,
    roc_auc: f64,
    delta_f1: f64,
    w1: f64,
    w2: f64,
    rho: f64,
    tau: f64,
}

#[derive(Serialize)]
struct TrajRow<'a> {
    label: &'a str,
    iteration: usize,
    f1_mean: f64,
    f1_lower: f64,
    f1_upper: f64,
}

#[derive(Serialize)]
struct AblRow<'a> {
    variant: &'a str,
    f1_mean: f64,
    f1_lower: f64,
    f1_upper: f64,
    delta_vs_full: f64,
}

#[derive(Serialize)]
struct TraceRow<'a> {
    label: &'a str,
    seed: u64,
    iteration: usize,
    phase: &'a str,
    status: &'a str,
    count: usize,
}

/// Writes every report file into `dir`. Empty results give header-only
/// tables.
pub fn emit_reports(results: &ExperimentResults, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let summary = summarize(results);

    let mut iters = Vec::new();
    let labels: Vec<String> = results.runs.iter().map(|r| r.label()).collect();
    for (run, label) in results.runs.iter().zip(&labels) {
        for r in &run.reports {
            iters.push(IterRow {
                label,
                dataset: &run.dataset,
                seed: run.seed,
                iteration: r.iteration,
                f1: r.f1,
                precision: r.precision,
                recall: r.recall,
                accuracy: r.accuracy,
                roc_auc: r.roc_auc,
                delta_f1: r.delta_f1,
                w1: r.policy.w1,
                w2: r.policy.w2,
                rho: r.policy.rho,
                tau: r.policy.tau,
            });
        }
    }
    write_csv(
        dir.join("iterations.csv"),
        &iters,
        &[
            "label",
            "dataset",
            "seed",
            "iteration",
            "f1",
            "precision",
            "recall",
            "accuracy",
            "roc_auc",
            "delta_f1",
            "w1",
            "w2",
            "rho",
            "tau",
        ],
    )?;

    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    fs::write(dir.join("table.txt"), table(&summary))?;

    let distinct = results.labels();
    let mut traj = Vec::new();
    for label in &distinct {
        let runs = results.by_label(label);
        let n_iter = runs.iter().map(|r| r.reports.len()).max().unwrap_or(0);
        for i in 0..n_iter {
            let f1s: Vec<f64> = runs.iter().filter_map(|r| r.reports.get(i).map(|x| x.f1)).collect();
            let ci = mean_ci95(&f1s);
            traj.push(TrajRow { label, iteration: i + 1, f1_mean: ci.mean, f1_lower: ci.lower, f1_upper: ci.upper });
        }
    }
    write_csv(dir.join("trajectory.csv"), &traj, &["label", "iteration", "f1_mean", "f1_lower", "f1_upper"])?;

    let semas: Vec<&LabelSummary> = summary.systems.iter().filter(|s| s.system == System::Semas).collect();
    let full = semas.iter().find(|s| s.variant == "full").map(|s| s.f1.mean);
    let abl: Vec<AblRow> = semas
        .iter()
        .map(|s| AblRow {
            variant: &s.variant,
            f1_mean: s.f1.mean,
            f1_lower: s.f1.lower,
            f1_upper: s.f1.upper,
            delta_vs_full: full.map_or(f64::NAN, |f| s.f1.mean - f),
        })
        .collect();
    write_csv(dir.join("ablation.csv"), &abl, &["variant", "f1_mean", "f1_lower", "f1_upper", "delta_vs_full"])?;

    write_csv(dir.join("stats.csv"), &pairwise_stats(results), &["a", "b", "t", "dof", "p", "cohen_d"])?;
    fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timings(results))?)?;

    let mut trace = Vec::new();
    for (run, label) in results.runs.iter().zip(&labels) {
        for t in &run.trace {
            trace.push(TraceRow {
                label,
                seed: run.seed,
                iteration: t.iteration,
                phase: &t.phase,
                status: t.status.name(),
                count: t.count,
            });
        }
    }
    write_csv(dir.join("trace.csv"), &trace, &["label", "seed", "iteration", "phase", "status", "count"])?;

    Ok(REPORT_FILES.iter().map(|f| dir.join(f)).collect())
}
