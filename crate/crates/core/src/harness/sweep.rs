//! Sensitivity of scheme totals to the restoration rate and intervention charge.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

use super::config::{ExperimentConfig, SchemeName};
use super::experiment::{mean_std, run_experiment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    Kappa,
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: SweptParameter,
    pub value: f64,
    pub regime: String,
    pub scheme: SchemeName,
    pub mean_total: f64,
    pub std_total: f64,
    pub runs: usize,
}

/// Runs the configured schemes on the sweep regime once per grid value.
pub fn sweep_parameter(cfg: &ExperimentConfig, parameter: SweptParameter) -> Result<Vec<SweepRow>> {
    let grid = match parameter {
        SweptParameter::Kappa => &cfg.sweep.kappa,
        SweptParameter::Gamma => &cfg.sweep.gamma,
    };
    let mut rows = Vec::new();
    for &value in grid {
        let mut point = cfg.clone();
        match parameter {
            SweptParameter::Kappa => point.scenario.cost.kappa = value,
            SweptParameter::Gamma => point.scenario.cost.gamma = value,
        }
        point.experiment.regimes = vec![cfg.sweep.regime.clone()];
        let bundles = run_experiment(&point)?;
        for &scheme in &point.experiment.schemes {
            let totals: Vec<f64> = bundles.iter().filter_map(|b| b.record(scheme)).map(|r| r.total).collect();
            let (mean_total, std_total) = mean_std(&totals);
            rows.push(SweepRow {
                parameter,
                value,
                regime: cfg.sweep.regime.name.clone(),
                scheme,
                mean_total,
                std_total,
                runs: totals.len(),
            });
        }
    }
    Ok(rows)
}

pub struct SweepTables {
    pub kappa: Vec<SweepRow>,
    pub gamma: Vec<SweepRow>,
}

pub fn sweep_sensitivity(cfg: &ExperimentConfig) -> Result<SweepTables> {
    Ok(SweepTables {
        kappa: sweep_parameter(cfg, SweptParameter::Kappa)?,
        gamma: sweep_parameter(cfg, SweptParameter::Gamma)?,
    })
}

/// Writes `sweep_kappa.csv` and `sweep_gamma.csv`.
pub fn write_sweep(dir: &Path, tables: &SweepTables) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (name, rows) in [("sweep_kappa.csv", &tables.kappa), ("sweep_gamma.csv", &tables.gamma)] {
        let path = dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        if rows.is_empty() {
            w.write_record(["parameter", "value", "regime", "scheme", "mean_total", "std_total", "runs"])?;
        }
        for row in rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
