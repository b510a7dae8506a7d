//! Per-slot traffic loads and per-epoch opportunity-cost draws.
//!
//! A load is `B * S * L * rho`: an epoch traffic level `B` (requests/hour),
//! a seasonal multiplier `S`, a diurnal baseline `L` and the slot length.
//! All randomness comes from counter-keyed streams (see [`stream_rng`]) so a
//! draw depends only on `(seed, player, epoch, purpose)`.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coalition::INP_INDEX;
use crate::error::{Error, Result};
use crate::model::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub amplitude: f64,
    pub phase_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diurnal {
    pub a0: f64,
    #[serde(default)]
    pub harmonics: Vec<Harmonic>,
}

impl Default for Diurnal {
    fn default() -> Self {
        Diurnal {
            a0: 1.0,
            harmonics: Vec::new(),
        }
    }
}

/// `S(t) = 1 + amplitude * sin(2*pi*(t - phase_slots) / period_slots)` over the
/// global slot counter. Amplitude 0 (the default) gives `S = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seasonal {
    pub amplitude: f64,
    pub period_slots: f64,
    #[serde(default)]
    pub phase_slots: f64,
}

impl Default for Seasonal {
    fn default() -> Self {
        Seasonal {
            amplitude: 0.0,
            period_slots: 168.0,
            phase_slots: 0.0,
        }
    }
}

impl Seasonal {
    pub fn factor(&self, global_slot: usize) -> f64 {
        if self.amplitude == 0.0 {
            return 1.0;
        }
        1.0 + self.amplitude * (2.0 * PI * (global_slot as f64 - self.phase_slots) / self.period_slots).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadParams {
    /// Traffic level per epoch (requests/hour), index 0 is epoch 1.
    pub traffic_levels: Vec<f64>,
    /// Relative amplitude of per-slot uniform noise on the traffic level.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seasonal: Seasonal,
    #[serde(default)]
    pub diurnal: Diurnal,
}

impl LoadParams {
    pub fn constant(level: f64, epochs: usize) -> Self {
        LoadParams {
            traffic_levels: vec![level; epochs],
            noise: 0.0,
            seasonal: Seasonal::default(),
            diurnal: Diurnal::default(),
        }
    }

    pub fn validate(&self, who: &str, epochs: usize) -> Result<()> {
        if self.traffic_levels.len() != epochs {
            return Err(Error::Scenario(format!(
                "{who}: expected {epochs} traffic levels, got {}",
                self.traffic_levels.len()
            )));
        }
        if self.traffic_levels.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
            return Err(Error::Scenario(format!("{who}: traffic levels must be finite and >= 0")));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Scenario(format!("{who}: noise must lie in [0, 1]")));
        }
        if self.seasonal.amplitude != 0.0 && !(self.seasonal.period_slots > 0.0) {
            return Err(Error::Scenario(format!("{who}: seasonal period must be > 0")));
        }
        Ok(())
    }
}

/// `a0 + sum_m a_m * sin(2*pi*m*(hour - t_m) / 24)`.
pub fn diurnal_baseline(diurnal: &Diurnal, slot_hour: f64) -> f64 {
    diurnal
        .harmonics
        .iter()
        .enumerate()
        .fold(diurnal.a0, |acc, (m, h)| {
            let m = (m + 1) as f64;
            acc + h.amplitude * (2.0 * PI * m * (slot_hour - h.phase_hours) / 24.0).sin()
        })
}

/// What a random stream is used for; part of the stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    OpportunityCost = 1,
    LoadNoise = 2,
    Diagnostics = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a sub-seed from a parent seed and a list of integer labels.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(seed), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

/// Independent generator for `(seed, player, epoch, purpose)`.
pub fn stream_rng(seed: u64, player: usize, epoch: usize, purpose: StreamPurpose) -> ChaCha8Rng {
    let key = seed ^ derive_seed(0x5EED_u64, &[player as u64, epoch as u64, purpose as u64]);
    ChaCha8Rng::seed_from_u64(key)
}

/// Per-SP, per-slot loads of one epoch. Row `i` belongs to SP `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadMatrix {
    pub epoch: usize,
    pub rows: Vec<Vec<f64>>,
    /// Number of slots where the raw product dipped below zero.
    pub clamped: usize,
}

impl LoadMatrix {
    pub fn n_slots(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Loads of the SP with 1-based player index `sp`.
    pub fn sp_row(&self, sp: usize) -> &[f64] {
        &self.rows[sp - 1]
    }

    pub fn row_sum(&self, sp: usize) -> f64 {
        self.sp_row(sp).iter().sum()
    }

    /// `epoch,slot,sp_index,load` rows, without header.
    pub fn write_csv_rows<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            for (slot, load) in row.iter().enumerate() {
                w.write_record([
                    self.epoch.to_string(),
                    slot.to_string(),
                    (i + 1).to_string(),
                    load.to_string(),
                ])?;
            }
        }
        Ok(())
    }
}

pub const LOAD_CSV_HEADER: [&str; 4] = ["epoch", "slot", "sp_index", "load"];

/// Loads for every SP in epoch `epoch` (1-based).
pub fn generate_loads(scenario: &Scenario, epoch: usize) -> LoadMatrix {
    assert!(
        (1..=scenario.grid.epochs).contains(&epoch),
        "epoch {epoch} outside 1..={}",
        scenario.grid.epochs
    );
    let grid = &scenario.grid;
    let mut clamped = 0;
    let rows = scenario
        .sps
        .iter()
        .enumerate()
        .map(|(i, sp)| {
            let params = &sp.load;
            let level = params.traffic_levels[epoch - 1];
            let mut noise_rng = (params.noise > 0.0)
                .then(|| stream_rng(scenario.seed, i + 1, epoch, StreamPurpose::LoadNoise));
            (0..grid.slots_per_epoch)
                .map(|slot| {
                    let mut b = level;
                    if let Some(rng) = noise_rng.as_mut() {
                        b *= 1.0 + params.noise * (2.0 * rng.gen::<f64>() - 1.0);
                    }
                    let hours = slot as f64 * grid.rho_hours;
                    let global_slot = (epoch - 1) * grid.slots_per_epoch + slot;
                    let raw = b
                        * params.seasonal.factor(global_slot)
                        * diurnal_baseline(&params.diurnal, hours.rem_euclid(24.0))
                        * grid.rho_hours;
                    if raw < 0.0 {
                        clamped += 1;
                        0.0
                    } else {
                        raw
                    }
                })
                .collect()
        })
        .collect();
    LoadMatrix { epoch, rows, clamped }
}

/// Opportunity costs of every player (index 0 is the InP) for one epoch.
pub fn sample_opportunity_costs(scenario: &Scenario, epoch: usize) -> Vec<f64> {
    assert!((1..=scenario.grid.epochs).contains(&epoch));
    (0..scenario.n_players())
        .map(|i| {
            let model = scenario.opportunity(i);
            if i == INP_INDEX && model.fixed_zero_for_inp {
                return 0.0;
            }
            let u: f64 = stream_rng(scenario.seed, i, epoch, StreamPurpose::OpportunityCost).gen();
            model.lower + u * (model.upper - model.lower)
        })
        .collect()
}

/// Opportunity costs for all epochs: `result[k - 1][player]`.
pub fn sample_all_opportunity_costs(scenario: &Scenario) -> Vec<Vec<f64>> {
    (1..=scenario.grid.epochs)
        .map(|k| sample_opportunity_costs(scenario, k))
        .collect()
}
