//! Seeded Monte-Carlo runs of the three schemes across opportunity-cost regimes.

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{select_from_table, BaselineResult, BaselineScheme, PlanTable};
use crate::coalition::Coalition;
use crate::dynamics::{run_dynamic_with, DynamicRun, EpochOutcome, Fallback};
use crate::error::{Error, Result};
use crate::loadgen::{derive_seed, generate_loads, sample_all_opportunity_costs, LoadMatrix};
use crate::model::Scenario;
use crate::planner::PlanCache;

use super::config::{ExperimentConfig, Regime, SchemeName};

/// Seed of run `run`. Regimes share it, so every regime sees the same loads
/// and the same uniform draws behind its opportunity costs.
pub fn run_seed(base_seed: u64, run: usize) -> u64 {
    derive_seed(base_seed, &[run as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub coalition: u32,
    pub members: String,
    pub capacity: f64,
    pub value: f64,
    /// Per player, before transfers.
    pub gross: Vec<f64>,
    /// Per player, after fees, penalties and compensations.
    pub net: Vec<f64>,
    pub v_out: Vec<f64>,
    pub entry_fees: Vec<f64>,
    pub exit_penalties: Vec<f64>,
    pub compensations: Vec<f64>,
    pub epsilon: Option<f64>,
    pub fallback: Fallback,
    pub inp_ledger: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub scheme: SchemeName,
    pub regime: String,
    pub run: usize,
    pub seed: u64,
    pub participated: bool,
    /// `v^dyn`, `v^stat` or `v^upd` of the chosen coalition(s).
    pub total: f64,
    pub inp_ledger_total: f64,
    pub epochs: Vec<EpochRecord>,
}

impl RunRecord {
    pub fn from_dynamic(regime: &Regime, run: usize, seed: u64, n_players: usize, dynamic: &DynamicRun) -> Self {
        let epochs = dynamic.epochs.iter().map(|e| dynamic_epoch(e, n_players)).collect();
        RunRecord {
            scheme: SchemeName::Dynamic,
            regime: regime.name.clone(),
            run,
            seed,
            participated: dynamic.epochs.iter().any(|e| !e.coalition.is_empty()),
            total: dynamic.v_dyn,
            inp_ledger_total: dynamic.inp_ledger_total,
            epochs,
        }
    }

    pub fn from_baseline(regime: &Regime, run: usize, seed: u64, result: &BaselineResult, v_out: &[Vec<f64>]) -> Self {
        let scheme = match result.scheme {
            BaselineScheme::Static => SchemeName::Static,
            BaselineScheme::Update => SchemeName::Update,
        };
        let n = result.per_player_cumulative.len();
        let epochs = (0..result.epoch_values.len())
            .map(|k| EpochRecord {
                epoch: k + 1,
                coalition: result.coalition.bits(),
                members: result.coalition.to_string(),
                capacity: result.capacities[k],
                value: result.epoch_values[k],
                gross: result.per_epoch_payoffs[k].clone(),
                net: result.per_epoch_payoffs[k].clone(),
                v_out: v_out[k].clone(),
                entry_fees: vec![0.0; n],
                exit_penalties: vec![0.0; n],
                compensations: vec![0.0; n],
                epsilon: None,
                fallback: Fallback::None,
                inp_ledger: 0.0,
            })
            .collect();
        RunRecord {
            scheme,
            regime: regime.name.clone(),
            run,
            seed,
            participated: result.participated,
            total: result.total_value,
            inp_ledger_total: 0.0,
            epochs,
        }
    }

    pub fn coalition(&self, epoch_index: usize) -> Coalition {
        Coalition::from_bits(self.epochs[epoch_index].coalition)
    }
}

fn dynamic_epoch(e: &EpochOutcome, n_players: usize) -> EpochRecord {
    let spread = |list: &[(usize, f64)]| {
        let mut row = vec![0.0; n_players];
        for &(i, v) in list {
            row[i] = v;
        }
        row
    };
    EpochRecord {
        epoch: e.epoch,
        coalition: e.coalition.bits(),
        members: e.coalition.to_string(),
        capacity: e.capacity,
        value: e.value,
        gross: e.gross_payoffs(n_players),
        net: e.net_payoffs(n_players),
        v_out: e.v_out.clone(),
        entry_fees: spread(&e.transfers.entry_fees),
        exit_penalties: spread(&e.transfers.exit_penalties),
        compensations: spread(&e.transfers.compensations),
        epsilon: (!e.coalition.is_empty()).then_some(e.transfers.epsilon),
        fallback: e.fallback,
        inp_ledger: e.inp_ledger,
    }
}

/// Everything one `(regime, run)` pair produced.
#[derive(Debug, Clone)]
pub struct RunBundle {
    pub regime_index: usize,
    pub regime: Regime,
    pub run: usize,
    pub seed: u64,
    pub scenario: Scenario,
    pub loads: Vec<LoadMatrix>,
    pub v_out: Vec<Vec<f64>>,
    /// One record per configured scheme, in configuration order.
    pub records: Vec<RunRecord>,
    pub dynamic: Option<DynamicRun>,
}

impl RunBundle {
    pub fn record(&self, scheme: SchemeName) -> Option<&RunRecord> {
        self.records.iter().find(|r| r.scheme == scheme)
    }
}

/// Runs every configured scheme on one regime and run index.
pub fn run_one(cfg: &ExperimentConfig, regime_index: usize, regime: &Regime, run: usize, schemes: &[SchemeName]) -> Result<RunBundle> {
    let seed = run_seed(cfg.experiment.seed, run);
    let scenario = cfg.scenario_for(regime, seed)?;
    let loads: Vec<LoadMatrix> = (1..=scenario.grid.epochs).map(|k| generate_loads(&scenario, k)).collect();
    let v_out = sample_all_opportunity_costs(&scenario);
    let mut records = Vec::with_capacity(schemes.len());
    let mut dynamic = None;
    for &scheme in schemes {
        let record = match scheme {
            SchemeName::Dynamic => {
                let d = run_dynamic_with(&scenario, &loads, &v_out, &PlanCache::new());
                let rec = RunRecord::from_dynamic(regime, run, seed, scenario.n_players(), &d);
                dynamic = Some(d);
                rec
            }
            SchemeName::Static | SchemeName::Update => {
                let b = if scheme == SchemeName::Static {
                    BaselineScheme::Static
                } else {
                    BaselineScheme::Update
                };
                let table = PlanTable::build(b, &scenario, &loads)?;
                let result = select_from_table(b, &scenario, &table, &v_out);
                RunRecord::from_baseline(regime, run, seed, &result, &v_out)
            }
        };
        records.push(record);
    }
    Ok(RunBundle {
        regime_index,
        regime: regime.clone(),
        run,
        seed,
        scenario,
        loads,
        v_out,
        records,
        dynamic,
    })
}

/// Runs `f` on a pool of `threads` workers (0 = all cores).
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// All `(regime, run)` bundles, ordered by regime then run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunBundle>> {
    cfg.validate()?;
    let exp = &cfg.experiment;
    let jobs: Vec<(usize, &Regime, usize)> = exp
        .regimes
        .iter()
        .enumerate()
        .flat_map(|(ri, r)| (0..exp.runs).map(move |run| (ri, r, run)))
        .collect();
    with_pool(exp.parallel, || {
        jobs.par_iter()
            .map(|&(ri, r, run)| run_one(cfg, ri, r, run, &exp.schemes))
            .collect::<Result<Vec<_>>>()
    })?
}

/// Mean and sample standard deviation (`n - 1`; 0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TotalRow {
    pub regime: String,
    pub scheme: SchemeName,
    pub mean_total: f64,
    pub std_total: f64,
    pub runs: usize,
}

/// Mean and spread of scheme totals per regime, in configuration order.
pub fn aggregate_totals(cfg: &ExperimentConfig, bundles: &[RunBundle]) -> Vec<TotalRow> {
    let mut rows = Vec::new();
    for (ri, regime) in cfg.experiment.regimes.iter().enumerate() {
        for &scheme in &cfg.experiment.schemes {
            let totals: Vec<f64> = bundles
                .iter()
                .filter(|b| b.regime_index == ri)
                .filter_map(|b| b.record(scheme).map(|r| r.total))
                .collect();
            let (mean_total, std_total) = mean_std(&totals);
            rows.push(TotalRow {
                regime: regime.name.clone(),
                scheme,
                mean_total,
                std_total,
                runs: totals.len(),
            });
        }
    }
    rows
}
