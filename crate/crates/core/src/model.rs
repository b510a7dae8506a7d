//! Domain types, parameter defaults and the cost/utility primitives.

use serde::{Deserialize, Serialize};

use crate::coalition::{Coalition, INP_INDEX, MAX_PLAYERS};
use crate::error::{Error, Result};
use crate::loadgen::{Diurnal, Harmonic, LoadParams, Seasonal};

pub const HOURS_PER_YEAR: f64 = 8760.0;

/// Infrastructure provider or a 1-based service provider index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlayerId {
    InP,
    Sp(u16),
}

impl PlayerId {
    /// Position in the scenario's player vector (and bit in a [`Coalition`]).
    pub fn index(self) -> usize {
        match self {
            PlayerId::InP => INP_INDEX,
            PlayerId::Sp(i) => i as usize,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == INP_INDEX {
            PlayerId::InP
        } else {
            PlayerId::Sp(i as u16)
        }
    }

    pub fn label(self) -> String {
        match self {
            PlayerId::InP => "InP".to_string(),
            PlayerId::Sp(i) => format!("SP{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityParams {
    /// Revenue per served request ($/request).
    pub beta: f64,
    /// Saturation rate per vcore.
    pub xi: f64,
}

impl Default for UtilityParams {
    fn default() -> Self {
        UtilityParams { beta: 6e-6, xi: 0.03 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// $/vcore paid for added capacity.
    pub d: f64,
    /// $/vcore recovered for released capacity.
    pub kappa: f64,
    /// Fixed $ charged whenever capacity changes.
    pub gamma: f64,
    /// Maintenance $/(hour * vcore).
    pub d_prime: f64,
    /// Interval duration in hours.
    pub delta_hours: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        let d = 10.94;
        CostParams {
            d,
            // 0.6 d
            kappa: 6.564,
            gamma: 2000.0,
            d_prime: 0.0225,
            delta_hours: HOURS_PER_YEAR,
        }
    }
}

impl CostParams {
    /// Maintenance cost of one vcore over one interval.
    pub fn maintenance_per_vcore(&self) -> f64 {
        self.d_prime * self.delta_hours
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("d", self.d),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("d_prime", self.d_prime),
            ("delta_hours", self.delta_hours),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Scenario(format!("cost.{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.kappa > self.d {
            return Err(Error::Scenario(format!(
                "cost.kappa ({}) must not exceed cost.d ({}); the capacity cost is not convex otherwise",
                self.kappa, self.d
            )));
        }
        Ok(())
    }
}

/// Epoch/slot discretisation. `scale_factor` maps the simulated slots of an
/// epoch onto the full interval so per-slot utility sums stay calibrated
/// against the full-interval maintenance cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub epochs: usize,
    pub slots_per_epoch: usize,
    pub rho_hours: f64,
    pub scale_factor: f64,
}

impl TimeGrid {
    pub fn new(epochs: usize, slots_per_epoch: usize, rho_hours: f64, delta_hours: f64) -> Self {
        let scale_factor = delta_hours / (slots_per_epoch as f64 * rho_hours);
        TimeGrid {
            epochs,
            slots_per_epoch,
            rho_hours,
            scale_factor,
        }
    }

    pub fn validate(&self, delta_hours: f64) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Scenario("grid.epochs must be >= 1".into()));
        }
        if self.slots_per_epoch < 1 {
            return Err(Error::Scenario("grid.slots_per_epoch must be >= 1".into()));
        }
        if !(self.rho_hours > 0.0) || !(self.scale_factor > 0.0) {
            return Err(Error::Scenario("grid.rho_hours and grid.scale_factor must be > 0".into()));
        }
        let covered = self.slots_per_epoch as f64 * self.rho_hours * self.scale_factor;
        if ((covered - delta_hours) / delta_hours.max(f64::MIN_POSITIVE)).abs() > 1e-9 {
            return Err(Error::Scenario(format!(
                "slots_per_epoch * rho_hours * scale_factor = {covered} does not match delta_hours = {delta_hours}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpportunityCostModel {
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub fixed_zero_for_inp: bool,
}

impl OpportunityCostModel {
    pub fn uniform(lower: f64, upper: f64) -> Self {
        OpportunityCostModel {
            lower,
            upper,
            fixed_zero_for_inp: false,
        }
    }

    pub fn zero_for_inp() -> Self {
        OpportunityCostModel {
            lower: 0.0,
            upper: 0.0,
            fixed_zero_for_inp: true,
        }
    }

    pub fn validate(&self, who: &str) -> Result<()> {
        if !(self.lower >= 0.0) || !(self.upper >= self.lower) || !self.upper.is_finite() {
            return Err(Error::Scenario(format!(
                "{who}: opportunity cost bounds must satisfy 0 <= lower <= upper, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonPolicy {
    /// Midpoint of the feasible slack interval (1 when no compensation is owed).
    MidpointOfFeasible,
    /// A fixed slack, clamped into the feasible interval of each transition.
    Fixed(f64),
}

impl Default for EpsilonPolicy {
    fn default() -> Self {
        EpsilonPolicy::MidpointOfFeasible
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpProfile {
    pub utility: UtilityParams,
    pub load: LoadParams,
    pub opportunity: OpportunityCostModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InpProfile {
    pub opportunity: OpportunityCostModel,
}

impl Default for InpProfile {
    fn default() -> Self {
        InpProfile {
            opportunity: OpportunityCostModel::zero_for_inp(),
        }
    }
}

/// Everything a single seeded run needs.
///
/// Players are the InP (index 0) followed by `sps[0]` as SP1, `sps[1]` as SP2
/// and so on, so the single-InP and contiguous-SP invariants hold by
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub inp: InpProfile,
    pub sps: Vec<SpProfile>,
    pub cost: CostParams,
    pub grid: TimeGrid,
    pub epsilon_policy: EpsilonPolicy,
    pub seed: u64,
}

impl Scenario {
    pub fn n_players(&self) -> usize {
        self.sps.len() + 1
    }

    pub fn n_sps(&self) -> usize {
        self.sps.len()
    }

    pub fn players(&self) -> impl Iterator<Item = PlayerId> {
        (0..self.n_players()).map(PlayerId::from_index)
    }

    pub fn grand_coalition(&self) -> Coalition {
        Coalition::grand(self.n_players())
    }

    /// SP profile by 1-based player index.
    pub fn sp(&self, index: usize) -> &SpProfile {
        &self.sps[index - 1]
    }

    pub fn opportunity(&self, index: usize) -> &OpportunityCostModel {
        if index == INP_INDEX {
            &self.inp.opportunity
        } else {
            &self.sp(index).opportunity
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sps.is_empty() {
            return Err(Error::Scenario("at least one SP is required".into()));
        }
        if self.n_players() > MAX_PLAYERS {
            return Err(Error::Scenario(format!(
                "at most {} players are supported, got {}",
                MAX_PLAYERS,
                self.n_players()
            )));
        }
        self.cost.validate()?;
        self.grid.validate(self.cost.delta_hours)?;
        self.inp.opportunity.validate("InP")?;
        for (n, sp) in self.sps.iter().enumerate() {
            let who = format!("SP{}", n + 1);
            if !(sp.utility.beta > 0.0) || !(sp.utility.xi > 0.0) {
                return Err(Error::Scenario(format!("{who}: beta and xi must be > 0")));
            }
            if sp.opportunity.fixed_zero_for_inp {
                return Err(Error::Scenario(format!(
                    "{who}: fixed_zero_for_inp only applies to the InP"
                )));
            }
            sp.opportunity.validate(&who)?;
            sp.load.validate(&who, self.grid.epochs)?;
        }
        if let EpsilonPolicy::Fixed(e) = self.epsilon_policy {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::Scenario(format!("fixed epsilon must lie in [0, 1], got {e}")));
            }
        }
        Ok(())
    }

    /// Sets the same `U(lower, upper)` opportunity-cost range on every SP.
    pub fn with_sp_opportunity(mut self, lower: f64, upper: f64) -> Self {
        for sp in &mut self.sps {
            sp.opportunity = OpportunityCostModel::uniform(lower, upper);
        }
        self
    }

    /// Shipped scenario: one InP and five SPs with staggered diurnal peaks.
    /// SP1..SP4 dip in epoch 3 and peak in epoch 4; SP5 has the lowest total
    /// demand, peaks in the morning trough of the others and surges in epoch 3.
    pub fn default_mec(slots_per_epoch: usize) -> Self {
        let cost = CostParams::default();
        let grid = TimeGrid::new(5, slots_per_epoch, 1.0, cost.delta_hours);
        // (traffic levels per epoch in requests/hour, diurnal harmonics (amplitude, phase hour))
        let sp_shapes: [(&[f64], &[(f64, f64)]); 5] = [
            (&[0.945e7, 1.06e7, 0.56e7, 1.766e7, 1.0665e7], &[(0.45, 9.0), (0.15, 2.0)]),
            (&[1.023e7, 1.10e7, 0.576e7, 1.727e7, 1.125e7], &[(0.40, 13.0), (0.10, 5.0)]),
            (&[0.984e7, 1.023e7, 0.552e7, 1.805e7, 1.0665e7], &[(0.50, 17.0), (0.20, 8.0)]),
            (&[1.10e7, 1.14e7, 0.592e7, 1.84e7, 1.185e7], &[(0.35, 20.0), (0.10, 11.0)]),
            (&[0.515e7, 0.594e7, 1.30e7, 0.90e7, 0.66e7], &[(0.60, 2.0), (0.10, 1.0)]),
        ];
        let sps = sp_shapes
            .iter()
            .map(|(levels, harmonics)| SpProfile {
                utility: UtilityParams::default(),
                load: LoadParams {
                    traffic_levels: levels.to_vec(),
                    noise: 0.1,
                    seasonal: Seasonal::default(),
                    diurnal: Diurnal {
                        a0: 1.0,
                        harmonics: harmonics
                            .iter()
                            .map(|&(amplitude, phase_hours)| Harmonic {
                                amplitude,
                                phase_hours,
                            })
                            .collect(),
                    },
                },
                opportunity: OpportunityCostModel::uniform(150_000.0, 240_000.0),
            })
            .collect();
        Scenario {
            inp: InpProfile::default(),
            sps,
            cost,
            grid,
            epsilon_policy: EpsilonPolicy::MidpointOfFeasible,
            seed: 0,
        }
    }
}

fn check_capacity(name: &str, c: f64) -> Result<()> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::domain(format!("{name} must be a finite non-negative capacity, got {c}")));
    }
    Ok(())
}

/// Capacity cost of moving from `c_prev` to `c_new` plus maintenance of `c_new`.
///
/// The intervention charge applies whenever `c_new != c_prev` under exact
/// comparison; the planner produces "no change" only by copying `c_prev`.
pub fn cost(c_new: f64, c_prev: f64, params: &CostParams) -> Result<f64> {
    check_capacity("c_new", c_new)?;
    check_capacity("c_prev", c_prev)?;
    Ok(cost_unchecked(c_new, c_prev, params))
}

#[inline]
pub(crate) fn cost_unchecked(c_new: f64, c_prev: f64, params: &CostParams) -> f64 {
    let added = (c_new - c_prev).max(0.0);
    let released = (c_prev - c_new).max(0.0);
    let intervention = if c_new != c_prev { params.gamma } else { 0.0 };
    params.d * added - params.kappa * released + intervention + params.maintenance_per_vcore() * c_new
}

/// Saturating revenue `beta * load * (1 - exp(-xi * h))`.
pub fn utility(beta: f64, xi: f64, load: f64, h: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::domain(format!("allocation must be non-negative, got {h}")));
    }
    if !(load >= 0.0) {
        return Err(Error::domain(format!("load must be non-negative, got {load}")));
    }
    Ok(beta * load * -(-xi * h).exp_m1())
}
