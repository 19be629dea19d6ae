//! End-to-end experiment runs: data preparation, the three systems,
//! ablations and report files.

mod baseline;
mod config;
mod operator;
mod prepare;
mod report;
mod results;
mod semas;

use std::thread;

pub use baseline::{run_baseline1, run_baseline2, BASELINE_RHO};
pub use config::{Ablation, RunConfig, Shift, System, DEFAULT_SEEDS};
pub use operator::{simulate_operator, AcceptanceTally, SimulatedOperator};
pub use prepare::{BaselineInputs, Prepared, Workbench};
pub use report::{
    emit_reports, pairwise_stats, summarize, timings, LabelSummary, LabelTiming, PairStat, Summary, REPORT_FILES,
};
pub use results::{CloudLog, ExperimentResults, PhaseRecord, PhaseStatus, SystemRun, PHASES};
pub use semas::{run_semas, ActionEvent, AnomalyEvent, ChunkPayload, MonitorLog, PolicyUpdate, ScoreRecord};

use crate::error::{Error, Result};

/// Runs one system on one seed.
pub fn run_system(p: &Prepared, cfg: &RunConfig) -> Result<SystemRun> {
    match cfg.system {
        System::Semas => run_semas(p, cfg),
        System::Baseline1 => run_baseline1(p, cfg),
        System::Baseline2 => run_baseline2(p, cfg),
    }
}

/// Runs `cfg.system` on every seed, sharing prepared data through `bench`.
pub fn run_experiment_with(cfg: &RunConfig, bench: &Workbench) -> Result<ExperimentResults> {
    cfg.validate()?;
    let one = |seed: u64| -> Result<SystemRun> { run_system(&*bench.prepared(cfg, seed)?, cfg) };
    let runs = if cfg.parallel_seeds && cfg.seeds.len() > 1 {
        thread::scope(|s| {
            let handles: Vec<_> = cfg.seeds.iter().map(|&seed| s.spawn(move || one(seed))).collect();
            handles
                .into_iter()
                .map(|h| h.join().map_err(|_| Error::Worker("seed worker panicked".into()))?)
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        cfg.seeds.iter().map(|&seed| one(seed)).collect::<Result<Vec<_>>>()?
    };
    Ok(ExperimentResults { runs })
}

pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentResults> {
    run_experiment_with(cfg, &Workbench::new())
}

/// The full system and each single-switch variant of the main system.
pub fn ablation_variants() -> Vec<Ablation> {
    let mut out = vec![Ablation::full()];
    out.extend(Ablation::SWITCHES.iter().map(|s| Ablation::only(s).expect("known switch")));
    out
}

pub fn run_ablation_suite(cfg: &RunConfig, bench: &Workbench) -> Result<ExperimentResults> {
    let mut all = ExperimentResults::default();
    for ablation in ablation_variants() {
        let c = RunConfig { system: System::Semas, ablation, ..cfg.clone() };
        all.extend(run_experiment_with(&c, bench)?);
    }
    Ok(all)
}

/// All three systems on the same data and seeds.
pub fn compare(cfg: &RunConfig, bench: &Workbench) -> Result<ExperimentResults> {
    let mut all = ExperimentResults::default();
    for system in System::ALL {
        let c = RunConfig { system, ablation: Ablation::full(), ..cfg.clone() };
        all.extend(run_experiment_with(&c, bench)?);
    }
    Ok(all)
}
