use std::fs;

use super::fixtures::{matrix, scenario};
use crate::dynamics::{run_dynamic, run_dynamic_with, Fallback};
use crate::harness::config::{ExperimentConfig, SchemeName};
use crate::harness::experiment::mean_std;
use crate::harness::output::TABLE_FILES;
use crate::harness::sweep::{sweep_parameter, SweptParameter};
use crate::harness::{aggregate_totals, run_experiment, write_outputs};
use crate::loadgen::LoadParams;
use crate::planner::{plan_value, EpochInputs, PlanCache};
use crate::Scenario;

fn small_config(parallel: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.scenario.slots_per_epoch = 24;
    cfg.experiment.runs = 3;
    cfg.experiment.regimes = vec!["low".parse().unwrap(), "very-high".parse().unwrap()];
    cfg.experiment.parallel = parallel;
    cfg
}

#[test]
fn outputs_are_byte_identical_across_worker_counts() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, workers) in dirs.iter().zip([1, 3]) {
        let cfg = small_config(workers);
        let bundles = run_experiment(&cfg).unwrap();
        write_outputs(dir.path(), &cfg, &bundles).unwrap();
    }
    let names = TABLE_FILES.iter().copied().chain(["runs.jsonl", "diagnostics.jsonl"]);
    for name in names {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).unwrap();
        assert!(!a.is_empty(), "{name} is empty");
        assert!(a == b, "{name} differs");
    }
}

#[test]
fn totals_table_recomputes_from_records() {
    let cfg = small_config(0);
    let bundles = run_experiment(&cfg).unwrap();
    let rows = aggregate_totals(&cfg, &bundles);
    assert_eq!(rows.len(), 2 * 3);
    for row in rows {
        let totals: Vec<f64> = bundles
            .iter()
            .filter(|b| b.regime.name == row.regime)
            .map(|b| b.record(row.scheme).unwrap().total)
            .collect();
        let n = totals.len() as f64;
        let mean = totals.iter().sum::<f64>() / n;
        let var = totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((row.mean_total - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        assert!((row.std_total - var.sqrt()).abs() <= 1e-12 * var.sqrt().max(1.0));
        assert_eq!(row.runs, 3);
    }
}

#[test]
fn records_round_trip_through_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(0);
    let bundles = run_experiment(&cfg).unwrap();
    write_outputs(dir.path(), &cfg, &bundles).unwrap();
    let text = fs::read_to_string(dir.path().join("runs.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2 * 3 * 3);
    for (line, record) in lines.iter().zip(bundles.iter().flat_map(|b| &b.records)) {
        assert_eq!(line["scheme"], record.scheme.as_str());
        assert_eq!(line["total"].as_f64().unwrap(), record.total);
        assert_eq!(line["epochs"].as_array().unwrap().len(), 5);
    }
    let header = fs::read_to_string(dir.path().join("fig1_totals.csv")).unwrap();
    assert!(header.starts_with("regime,scheme,mean_total,std_total,runs\n"));
}

#[test]
fn one_epoch_has_no_transfers() {
    let mut s = Scenario::default_mec(24).with_sp_opportunity(0.0, 10_000.0);
    s.grid.epochs = 1;
    for sp in &mut s.sps {
        sp.load.traffic_levels.truncate(1);
    }
    let run = run_dynamic(&s).unwrap();
    let e = &run.epochs[0];
    assert!(!e.coalition.is_empty());
    assert_eq!(run.v_dyn, e.value);
    assert_eq!(e.transfers.total_fees() + e.transfers.total_penalties() + e.transfers.total_compensations(), 0.0);
}

#[test]
fn zero_loads_never_form_a_coalition() {
    let mut s = Scenario::default_mec(24);
    for sp in &mut s.sps {
        sp.load = LoadParams::constant(0.0, 5);
    }
    let run = run_dynamic(&s).unwrap();
    assert_eq!(run.v_dyn, 0.0);
    assert_eq!(run.inp_ledger_total, 0.0);
    for e in &run.epochs {
        assert!(e.coalition.is_empty());
        assert_eq!(e.capacity, 0.0);
        assert_eq!(e.fallback, Fallback::Idle);
    }
}

#[test]
fn collapse_after_build_goes_through_the_inp_ledger() {
    // profitable first epoch, then opportunity costs nobody can cover
    let s = scenario(&[(6e-6, 0.03)], 4, 2);
    let loads = vec![matrix(1, vec![vec![1e7; 4]]), matrix(2, vec![vec![1e7; 4]])];
    let v_out = vec![vec![0.0, 0.0], vec![0.0, 1e12]];
    let run = run_dynamic_with(&s, &loads, &v_out, &PlanCache::new());
    let built = run.epochs[0].capacity;
    assert!(built > 0.0);
    let e = &run.epochs[1];
    assert!(e.coalition.is_empty());
    assert_eq!(e.fallback, Fallback::Dismantled);
    assert_eq!(e.capacity, 0.0);
    let expected = s.cost.kappa * built - s.cost.gamma;
    assert!((e.inp_ledger - expected).abs() <= 1e-9 * expected.abs());
    assert_eq!(run.v_dyn, run.epochs[0].value);
    let inputs = EpochInputs { epoch: 1, loads: loads[0].clone(), c_prev: 0.0 };
    assert_eq!(run.epochs[0].value, plan_value(&s, s.grand_coalition(), &inputs).value);
}

fn sweep_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.experiment.runs = 6;
    cfg
}

#[test]
fn restoration_rate_barely_moves_dynamic_totals() {
    let mut cfg = sweep_config();
    cfg.experiment.schemes = vec![SchemeName::Dynamic];
    cfg.sweep.kappa = vec![0.0, 3.0, 6.0];
    let rows = sweep_parameter(&cfg, SweptParameter::Kappa).unwrap();
    let totals: Vec<f64> = rows.iter().map(|r| r.mean_total).collect();
    let (lo, hi) = totals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    assert!(hi - lo < 0.05 * lo.abs(), "{totals:?}");
}

#[test]
fn doubling_the_intervention_charge_hurts_dynamic_most() {
    let mut cfg = sweep_config();
    cfg.sweep.gamma = vec![2000.0, 4000.0];
    let rows = sweep_parameter(&cfg, SweptParameter::Gamma).unwrap();
    let drop = |scheme: SchemeName| {
        let pick = |g: f64| rows.iter().find(|r| r.scheme == scheme && r.value == g).unwrap().mean_total;
        pick(2000.0) - pick(4000.0)
    };
    let drops: Vec<(SchemeName, f64)> = SchemeName::ALL.iter().map(|&s| (s, drop(s))).collect();
    assert!(drops.iter().all(|&(_, d)| d > 0.0), "{drops:?}");
    let dynamic = drop(SchemeName::Dynamic);
    assert!(drops.iter().all(|&(s, d)| s == SchemeName::Dynamic || d < dynamic), "{drops:?}");
}

#[test]
fn std_helper_matches_two_pass_formula() {
    let xs = [3.5, -1.25, 8.0, 8.0, 0.0];
    let (m, s) = mean_std(&xs);
    let mean = xs.iter().sum::<f64>() / 5.0;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
    assert_eq!(m, mean);
    assert!((s - var.sqrt()).abs() < 1e-15);
}
