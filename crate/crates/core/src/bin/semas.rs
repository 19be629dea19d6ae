use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use semas_core::datagen::{generate, persist_dataset, stratified_split, DatasetProfile};
use semas_core::error::{Error, Result};
use semas_core::pipeline::{
    compare, emit_reports, run_ablation_suite, run_experiment_with, Ablation, ExperimentResults, RunConfig, System,
    Workbench,
};

#[derive(Parser)]
#[command(name = "semas", version, about = "Edge/fog/cloud predictive maintenance experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one system over every seed.
    Run(RunArgs),
    /// Run the full system and each single-switch ablation.
    Ablate(RunArgs),
    /// Run all three systems on the same seeds.
    Compare(RunArgs),
    /// Write a synthetic dataset and its manifest.
    GenData(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    system: Option<String>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated switches: no_ppo, no_consensus, no_federated, no_response.
    #[arg(long)]
    ablate: Option<String>,
    /// JSON run configuration. Its keys take precedence over flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "boiler")]
    dataset: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long, default_value = "data")]
    out: PathBuf,
}

fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn build_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(d) = &a.dataset {
        cfg.dataset = d.clone();
    }
    if let Some(s) = &a.system {
        cfg.system = System::parse(s)?;
    }
    if let Some(s) = &a.seeds {
        cfg.seeds = s.clone();
    }
    if let Some(n) = a.iterations {
        cfg.iterations = n;
    }
    if let Some(o) = &a.out {
        cfg.out = Some(o.clone());
    }
    if let Some(ab) = &a.ablate {
        cfg.ablation = Ablation::parse_list(ab)?;
    }
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path)?;
        let file: Value = serde_json::from_str(&text)?;
        if !file.is_object() {
            return Err(Error::Config(format!("{} must hold a JSON object", path.display())));
        }
        let mut merged = serde_json::to_value(&cfg)?;
        overlay(&mut merged, file);
        cfg = serde_json::from_value(merged)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn finish(results: &ExperimentResults, cfg: &RunConfig) -> Result<()> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    emit_reports(results, &dir)?;
    print!("{}", std::fs::read_to_string(dir.join("table.txt"))?);
    println!("reports written to {}", dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => {
            let cfg = build_config(&a)?;
            finish(&run_experiment_with(&cfg, &Workbench::new())?, &cfg)
        }
        Command::Ablate(a) => {
            let cfg = build_config(&a)?;
            finish(&run_ablation_suite(&cfg, &Workbench::new())?, &cfg)
        }
        Command::Compare(a) => {
            let cfg = build_config(&a)?;
            finish(&compare(&cfg, &Workbench::new())?, &cfg)
        }
        Command::GenData(g) => {
            let mut profile = DatasetProfile::by_name(&g.dataset, g.seed)
                .ok_or_else(|| Error::Config(format!("unknown dataset profile `{}`", g.dataset)))?;
            if let Some(n) = g.n_samples {
                profile.n_samples = n;
            }
            let samples = generate(&profile)?;
            let split = stratified_split(&samples, profile.train_fraction, g.seed)?;
            let stem = format!("{}_seed{}", profile.name, g.seed);
            persist_dataset(&profile, &samples, &split, &g.out, &stem)?;
            println!("wrote {} rows to {}", samples.len(), g.out.join(format!("{stem}.csv")).display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let json = serde_json::to_string(&e.report()).unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", e.kind()));
            eprintln!("{json}");
            ExitCode::FAILURE
        }
    }
}
