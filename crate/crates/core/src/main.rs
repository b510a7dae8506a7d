use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use coinvest::harness::config::parse_list;
use coinvest::harness::experiment::with_pool;
use coinvest::harness::validate::check_bundle;
use coinvest::harness::{run_experiment, sweep_sensitivity, write_outputs, write_sweep, ExperimentConfig};
use coinvest::{Error, Result};

#[derive(Parser)]
#[command(name = "coinvest", version, about = "Seeded co-investment experiments with dynamic coalitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scheme across the configured regimes and write the tables.
    Run(Overrides),
    /// Sweep the restoration rate and the intervention charge.
    Sweep(Overrides),
    /// Run the invariant suite on every configured run.
    Validate(Overrides),
    /// Print the effective configuration as TOML.
    ShowConfig(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// TOML configuration file (defaults apply when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated: static,update,dynamic.
    #[arg(long)]
    schemes: Option<String>,
    /// Comma-separated presets (low, moderate, high, very-high) or a..b ranges in $.
    #[arg(long)]
    regimes: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    slots_per_epoch: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    parallel: Option<usize>,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let exp = &mut cfg.experiment;
        if let Some(runs) = self.runs {
            exp.runs = runs;
        }
        if let Some(seed) = self.seed {
            exp.seed = seed;
        }
        if let Some(s) = &self.schemes {
            exp.schemes = parse_list(s)?;
        }
        if let Some(r) = &self.regimes {
            exp.regimes = parse_list(r)?;
        }
        if let Some(out) = &self.out {
            exp.out = out.clone();
        }
        if let Some(p) = self.parallel {
            exp.parallel = p;
        }
        if let Some(slots) = self.slots_per_epoch {
            cfg.scenario.slots_per_epoch = slots;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(o) => {
            let cfg = o.resolve()?;
            let bundles = run_experiment(&cfg)?;
            print_paths(&write_outputs(&cfg.experiment.out, &cfg, &bundles)?);
        }
        Command::Sweep(o) => {
            let cfg = o.resolve()?;
            let tables = sweep_sensitivity(&cfg)?;
            print_paths(&write_sweep(&cfg.experiment.out, &tables)?);
        }
        Command::Validate(o) => {
            let cfg = o.resolve()?;
            let bundles = run_experiment(&cfg)?;
            let reports = with_pool(cfg.experiment.parallel, || {
                use rayon::prelude::*;
                bundles.par_iter().map(check_bundle).collect::<Vec<_>>()
            })?;
            let mut failed = 0;
            for r in &reports {
                println!("{}", serde_json::to_string(r)?);
                failed += usize::from(!r.violations.is_empty());
            }
            if failed > 0 {
                eprintln!(
                    "{}",
                    json!({"error": "validation", "message": format!("{failed} of {} runs violate invariants", reports.len())})
                );
                return Ok(ExitCode::from(1));
            }
        }
        Command::ShowConfig(o) => {
            print!("{}", o.resolve()?.to_toml()?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            report(&e);
            ExitCode::from(2)
        }
    }
}

fn report(e: &Error) {
    eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
}
