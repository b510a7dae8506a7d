//! Figure-ready CSV tables and JSON-lines records.
//!
//! | file | columns |
//! |---|---|
//! | `fig1_totals.csv` | regime, scheme, mean_total, std_total, runs |
//! | `fig2_capacity.csv` | regime, scheme, epoch, mean_capacity, std_capacity |
//! | `fig3_payoffs.csv` | regime, scheme, epoch, player, mean_gross, mean_net, mean_v_out, presence |
//! | `fig4_traffic.csv` | epoch, player, mean_load, std_load, peak_load |
//! | `fig5_participation.csv` | regime, scheme, run, epoch, player, event, gross, fee, penalty, compensation, net, v_out, epsilon |
//! | `fig6_presence.csv` | regime, scheme, epoch, player, presence |
//! | `loads.csv` | epoch, slot, sp_index, load (run 0) |
//! | `runs.jsonl` | one [`RunRecord`] per line |
//! | `diagnostics.jsonl` | one object per dynamic epoch |
//!
//! Loads are identical across regimes, so traffic tables use the first regime.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::loadgen::LOAD_CSV_HEADER;
use crate::model::PlayerId;

use super::config::{ExperimentConfig, SchemeName};
use super::experiment::{aggregate_totals, mean_std, RunBundle, RunRecord};

pub const TABLE_FILES: [&str; 7] = [
    "fig1_totals.csv",
    "fig2_capacity.csv",
    "fig3_payoffs.csv",
    "fig4_traffic.csv",
    "fig5_participation.csv",
    "fig6_presence.csv",
    "loads.csv",
];

fn label(player: usize) -> String {
    PlayerId::from_index(player).label()
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| Error::io(&path, e))
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(dir, name)?))
}

fn finish<W: Write>(dir: &Path, name: &str, w: csv::Writer<W>) -> Result<()> {
    let path = dir.join(name);
    let mut inner = w.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(&path, e))
}

fn write_rows<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<()> {
    let mut w = csv_writer(dir, name)?;
    for row in rows {
        w.serialize(row)?;
    }
    finish(dir, name, w)
}

fn records<'a>(bundles: &'a [RunBundle], regime_index: usize, scheme: SchemeName) -> Vec<&'a RunRecord> {
    bundles
        .iter()
        .filter(|b| b.regime_index == regime_index)
        .filter_map(|b| b.record(scheme))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityRow {
    pub regime: String,
    pub scheme: SchemeName,
    pub epoch: usize,
    pub mean_capacity: f64,
    pub std_capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffRow {
    pub regime: String,
    pub scheme: SchemeName,
    pub epoch: usize,
    pub player: String,
    pub mean_gross: f64,
    pub mean_net: f64,
    pub mean_v_out: f64,
    pub presence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrafficRow {
    pub epoch: usize,
    pub player: String,
    /// Requests served in the epoch, averaged over runs.
    pub mean_load: f64,
    pub std_load: f64,
    /// Largest single-slot load seen in any run.
    pub peak_load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipationRow {
    pub regime: String,
    pub scheme: SchemeName,
    pub run: usize,
    pub epoch: usize,
    pub player: String,
    /// `join`, `leave` or `stay`.
    pub event: &'static str,
    pub gross: f64,
    pub fee: f64,
    pub penalty: f64,
    pub compensation: f64,
    pub net: f64,
    pub v_out: f64,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresenceRow {
    pub regime: String,
    pub scheme: SchemeName,
    pub epoch: usize,
    pub player: String,
    pub presence: f64,
}

fn n_players(bundles: &[RunBundle]) -> usize {
    bundles.first().map_or(0, |b| b.scenario.n_players())
}

fn n_epochs(bundles: &[RunBundle]) -> usize {
    bundles.first().map_or(0, |b| b.scenario.grid.epochs)
}

pub fn capacity_rows(cfg: &ExperimentConfig, bundles: &[RunBundle]) -> Vec<CapacityRow> {
    let mut rows = Vec::new();
    for (ri, regime) in cfg.experiment.regimes.iter().enumerate() {
        for &scheme in &cfg.experiment.schemes {
            let recs = records(bundles, ri, scheme);
            for k in 0..n_epochs(bundles) {
                let caps: Vec<f64> = recs.iter().map(|r| r.epochs[k].capacity).collect();
                let (mean_capacity, std_capacity) = mean_std(&caps);
                rows.push(CapacityRow {
                    regime: regime.name.clone(),
                    scheme,
                    epoch: k + 1,
                    mean_capacity,
                    std_capacity,
                });
            }
        }
    }
    rows
}

pub fn payoff_rows(cfg: &ExperimentConfig, bundles: &[RunBundle]) -> Vec<PayoffRow> {
    let n = n_players(bundles);
    let mut rows = Vec::new();
    for (ri, regime) in cfg.experiment.regimes.iter().enumerate() {
        for &scheme in &cfg.experiment.schemes {
            let recs = records(bundles, ri, scheme);
            let runs = recs.len() as f64;
            for k in 0..n_epochs(bundles) {
                for i in 0..n {
                    let mean = |f: &dyn Fn(&RunRecord) -> f64| recs.iter().map(|r| f(r)).sum::<f64>() / runs;
                    rows.push(PayoffRow {
                        regime: regime.name.clone(),
                        scheme,
                        epoch: k + 1,
                        player: label(i),
                        mean_gross: mean(&|r| r.epochs[k].gross[i]),
                        mean_net: mean(&|r| r.epochs[k].net[i]),
                        mean_v_out: mean(&|r| r.epochs[k].v_out[i]),
                        presence: mean(&|r| f64::from(u8::from(r.coalition(k).contains(i)))),
                    });
                }
            }
        }
    }
    rows
}

pub fn traffic_rows(bundles: &[RunBundle]) -> Vec<TrafficRow> {
    let first: Vec<&RunBundle> = bundles.iter().filter(|b| b.regime_index == 0).collect();
    let mut rows = Vec::new();
    for k in 0..n_epochs(bundles) {
        for sp in 1..n_players(bundles) {
            let totals: Vec<f64> = first.iter().map(|b| b.loads[k].row_sum(sp)).collect();
            let peak = first
                .iter()
                .flat_map(|b| b.loads[k].sp_row(sp).iter().copied())
                .fold(0.0, f64::max);
            let (mean_load, std_load) = mean_std(&totals);
            rows.push(TrafficRow {
                epoch: k + 1,
                player: label(sp),
                mean_load,
                std_load,
                peak_load: peak,
            });
        }
    }
    rows
}

/// Membership changes and transfers of every player in `S_k` or `S_{k-1}`.
pub fn participation_rows(bundles: &[RunBundle]) -> Vec<ParticipationRow> {
    let mut rows = Vec::new();
    for b in bundles {
        for r in &b.records {
            for (k, e) in r.epochs.iter().enumerate() {
                let cur = r.coalition(k);
                let prev = if k == 0 { Coalition::EMPTY } else { r.coalition(k - 1) };
                for i in cur.union(prev).members() {
                    let event = match (prev.contains(i), cur.contains(i)) {
                        (false, true) => "join",
                        (true, false) => "leave",
                        _ => "stay",
                    };
                    rows.push(ParticipationRow {
                        regime: r.regime.clone(),
                        scheme: r.scheme,
                        run: r.run,
                        epoch: e.epoch,
                        player: label(i),
                        event,
                        gross: e.gross[i],
                        fee: e.entry_fees[i],
                        penalty: e.exit_penalties[i],
                        compensation: e.compensations[i],
                        net: e.net[i],
                        v_out: e.v_out[i],
                        epsilon: e.epsilon,
                    });
                }
            }
        }
    }
    rows
}

pub fn presence_rows(cfg: &ExperimentConfig, bundles: &[RunBundle]) -> Vec<PresenceRow> {
    payoff_rows(cfg, bundles)
        .into_iter()
        .map(|p| PresenceRow {
            regime: p.regime,
            scheme: p.scheme,
            epoch: p.epoch,
            player: p.player,
            presence: p.presence,
        })
        .collect()
}

fn write_jsonl<T: Serialize>(dir: &Path, name: &str, items: impl IntoIterator<Item = T>) -> Result<()> {
    let path = dir.join(name);
    let mut w = create(dir, name)?;
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

fn diagnostics(bundles: &[RunBundle]) -> Vec<serde_json::Value> {
    let mut out = Vec::new();
    for b in bundles {
        let Some(d) = &b.dynamic else { continue };
        for e in &d.epochs {
            let plan = e.plan.as_ref().map(|p| {
                json!({
                    "branch": p.branch,
                    "capacity": p.capacity,
                    "c_prev": p.c_prev,
                    "branch_values": p.branch_values,
                    "c_max": p.diagnostics.c_max,
                    "bisection_iterations": p.diagnostics.bisection_iterations,
                    "iteration_cap_hit": p.diagnostics.iteration_cap_hit,
                })
            });
            out.push(json!({
                "regime": b.regime.name,
                "run": b.run,
                "seed": b.seed,
                "epoch": e.epoch,
                "previous": e.previous.to_string(),
                "selected": e.coalition.to_string(),
                "value": e.value,
                "candidates": e.n_candidates,
                "compatible": e.compatible.iter().map(Coalition::to_string).collect::<Vec<_>>(),
                "epsilon": e.transfers.epsilon,
                "epsilon_bounds": e.transfers.epsilon_bounds,
                "pot": e.transfers.pot,
                "required": e.transfers.required,
                "transfers": &e.transfers,
                "stability": &e.stability,
                "fallback": e.fallback,
                "inp_ledger": e.inp_ledger,
                "clamped_slots": b.loads[e.epoch - 1].clamped,
                "plan": plan,
            }));
        }
    }
    out
}

/// Writes every table and record file into `dir`, creating it if needed.
/// Returns the paths written.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, bundles: &[RunBundle]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_rows(dir, "fig1_totals.csv", &aggregate_totals(cfg, bundles))?;
    write_rows(dir, "fig2_capacity.csv", &capacity_rows(cfg, bundles))?;
    write_rows(dir, "fig3_payoffs.csv", &payoff_rows(cfg, bundles))?;
    write_rows(dir, "fig4_traffic.csv", &traffic_rows(bundles))?;
    write_rows(dir, "fig5_participation.csv", &participation_rows(bundles))?;
    write_rows(dir, "fig6_presence.csv", &presence_rows(cfg, bundles))?;

    let mut w = csv_writer(dir, "loads.csv")?;
    w.write_record(LOAD_CSV_HEADER)?;
    if let Some(b) = bundles.iter().find(|b| b.regime_index == 0 && b.run == 0) {
        for m in &b.loads {
            m.write_csv_rows(&mut w)?;
        }
    }
    finish(dir, "loads.csv", w)?;

    write_jsonl(dir, "runs.jsonl", bundles.iter().flat_map(|b| &b.records))?;
    write_jsonl(dir, "diagnostics.jsonl", diagnostics(bundles))?;

    let mut written: Vec<PathBuf> = TABLE_FILES.iter().map(|f| dir.join(f)).collect();
    written.push(dir.join("runs.jsonl"));
    written.push(dir.join("diagnostics.jsonl"));
    Ok(written)
}
