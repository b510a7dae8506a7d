//! Fixed-coalition comparison schemes.
//!
//! *Static* deploys one capacity at the start and keeps it for the whole
//! horizon. *Update* re-plans capacity every epoch from the previous one with
//! a fixed coalition. Both choose their coalition ex post, from realised
//! opportunity costs summed over the horizon.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::dynamics::outranks;
use crate::error::{Error, Result};
use crate::game::{check_stability, shapley, StabilityReport};
use crate::loadgen::LoadMatrix;
use crate::model::{cost_unchecked, CostParams, Scenario};
use crate::planner::{optimize_capacity, CapacityProblem, EpochInputs, PlanCache, EpochGame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineScheme {
    Static,
    Update,
}

/// The plan a fixed coalition follows under one baseline scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemePlan {
    pub coalition: Coalition,
    /// Installed capacity per epoch.
    pub capacities: Vec<f64>,
    /// Net value attributed to each epoch; sums to `total_value`.
    pub epoch_values: Vec<f64>,
    pub total_value: f64,
}

fn require_viable(coalition: Coalition) -> Result<()> {
    if coalition.is_viable() {
        Ok(())
    } else {
        Err(Error::domain(format!("baseline schemes need the InP and at least one SP, got {coalition}")))
    }
}

/// One capacity for the whole horizon, deployed from nothing:
/// `Cost(C) = d C + gamma [C > 0] + d' K Delta C`.
///
/// Epoch values charge the deployment to the first epoch and maintenance to
/// every epoch.
pub fn solve_static(scenario: &Scenario, coalition: Coalition, loads: &[LoadMatrix]) -> Result<SchemePlan> {
    require_viable(coalition)?;
    let k = loads.len();
    let refs: Vec<&LoadMatrix> = loads.iter().collect();
    let horizon = CapacityProblem::new(scenario, coalition, &refs);
    let horizon_cost = CostParams {
        d_prime: scenario.cost.d_prime * k as f64,
        ..scenario.cost
    };
    let plan = optimize_capacity(&horizon, 0.0, &horizon_cost)?;
    let c = plan.capacity;
    let maintenance = scenario.cost.maintenance_per_vcore() * c;
    let epoch_values: Vec<f64> = loads
        .iter()
        .enumerate()
        .map(|(idx, load)| {
            let welfare = CapacityProblem::new(scenario, coalition, &[load]).welfare(c);
            let deploy = if idx == 0 {
                cost_unchecked(c, 0.0, &scenario.cost) - maintenance
            } else {
                0.0
            };
            welfare - deploy - maintenance
        })
        .collect();
    Ok(SchemePlan {
        coalition,
        capacities: vec![c; k],
        total_value: epoch_values.iter().sum(),
        epoch_values,
    })
}

/// Greedy per-epoch re-planning from `C_0 = 0`, threading the realised capacity.
pub fn solve_update(scenario: &Scenario, coalition: Coalition, loads: &[LoadMatrix]) -> Result<SchemePlan> {
    require_viable(coalition)?;
    let mut c_prev = 0.0;
    let mut capacities = Vec::with_capacity(loads.len());
    let mut epoch_values = Vec::with_capacity(loads.len());
    for load in loads {
        let problem = CapacityProblem::new(scenario, coalition, &[load]);
        let plan = optimize_capacity(&problem, c_prev, &scenario.cost)?;
        c_prev = plan.capacity;
        capacities.push(plan.capacity);
        epoch_values.push(plan.value);
    }
    Ok(SchemePlan {
        coalition,
        capacities,
        total_value: epoch_values.iter().sum(),
        epoch_values,
    })
}

pub fn solve(scheme: BaselineScheme, scenario: &Scenario, coalition: Coalition, loads: &[LoadMatrix]) -> Result<SchemePlan> {
    match scheme {
        BaselineScheme::Static => solve_static(scenario, coalition, loads),
        BaselineScheme::Update => solve_update(scenario, coalition, loads),
    }
}

/// Plans of every viable coalition, indexed by bitmask (`None` elsewhere).
pub struct PlanTable {
    plans: Vec<Option<SchemePlan>>,
}

impl PlanTable {
    pub fn build(scheme: BaselineScheme, scenario: &Scenario, loads: &[LoadMatrix]) -> Result<Self> {
        let grand = scenario.grand_coalition();
        let masks: Vec<Coalition> = grand.subsets().collect();
        let plans = masks
            .into_par_iter()
            .map(|c| if c.is_viable() { solve(scheme, scenario, c, loads).map(Some) } else { Ok(None) })
            .collect::<Result<Vec<_>>>()?;
        Ok(PlanTable { plans })
    }

    pub fn get(&self, coalition: Coalition) -> Option<&SchemePlan> {
        self.plans.get(coalition.bits() as usize).and_then(Option::as_ref)
    }

    pub fn horizon_value(&self, coalition: Coalition) -> f64 {
        self.get(coalition).map_or(0.0, |p| p.total_value)
    }

    pub fn epoch_value(&self, coalition: Coalition, epoch_index: usize) -> f64 {
        self.get(coalition).map_or(0.0, |p| p.epoch_values[epoch_index])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineResult {
    pub scheme: BaselineScheme,
    /// Empty when no coalition passes the participation test.
    pub coalition: Coalition,
    pub participated: bool,
    pub capacities: Vec<f64>,
    pub epoch_values: Vec<f64>,
    pub total_value: f64,
    /// `[epoch index][player]` Shapley split of each epoch's value.
    pub per_epoch_payoffs: Vec<Vec<f64>>,
    /// Horizon payoff per player.
    pub per_player_cumulative: Vec<f64>,
    pub stability: Option<StabilityReport>,
    /// Coalitions that passed the participation test.
    pub survivors: Vec<Coalition>,
}

/// Picks the coalition a fixed-membership scheme would form.
///
/// `v_out[k][player]` are the realised opportunity costs. A coalition
/// survives when its horizon Shapley split is in the horizon core and every
/// member's share covers the sum of its opportunity costs; the highest-value
/// survivor is chosen.
pub fn select_baseline_coalition(
    scheme: BaselineScheme,
    scenario: &Scenario,
    loads: &[LoadMatrix],
    v_out: &[Vec<f64>],
) -> Result<BaselineResult> {
    let table = PlanTable::build(scheme, scenario, loads)?;
    Ok(select_from_table(scheme, scenario, &table, v_out))
}

pub fn select_from_table(scheme: BaselineScheme, scenario: &Scenario, table: &PlanTable, v_out: &[Vec<f64>]) -> BaselineResult {
    let n = scenario.n_players();
    let k = v_out.len();
    let cumulative_out: Vec<f64> = (0..n).map(|i| v_out.iter().map(|row| row[i]).sum()).collect();
    let horizon = |c: Coalition| table.horizon_value(c);

    let mut survivors = Vec::new();
    let mut best: Option<(Coalition, StabilityReport)> = None;
    for coalition in scenario.grand_coalition().subsets().filter(|c| c.is_viable()) {
        let alloc = shapley(coalition, &horizon, 0);
        let report = check_stability(&alloc, &horizon, &cumulative_out);
        if !report.strongly_stable() {
            continue;
        }
        survivors.push(coalition);
        let value = horizon(coalition);
        if best.as_ref().is_none_or(|(b, _)| outranks((coalition, value), (*b, horizon(*b)))) {
            best = Some((coalition, report));
        }
    }

    match best {
        Some((coalition, report)) => {
            let plan = table.get(coalition).expect("viable survivor has a plan");
            let per_epoch_payoffs: Vec<Vec<f64>> = (0..k)
                .map(|e| {
                    let epoch_fn = |c: Coalition| table.epoch_value(c, e);
                    let alloc = shapley(coalition, &epoch_fn, e + 1);
                    let mut row = vec![0.0; n];
                    for (i, x) in alloc.payoffs {
                        row[i] = x;
                    }
                    row
                })
                .collect();
            let per_player_cumulative = (0..n).map(|i| per_epoch_payoffs.iter().map(|row| row[i]).sum()).collect();
            BaselineResult {
                scheme,
                coalition,
                participated: true,
                capacities: plan.capacities.clone(),
                epoch_values: plan.epoch_values.clone(),
                total_value: plan.total_value,
                per_epoch_payoffs,
                per_player_cumulative,
                stability: Some(report),
                survivors,
            }
        }
        None => BaselineResult {
            scheme,
            coalition: Coalition::EMPTY,
            participated: false,
            capacities: vec![0.0; k],
            epoch_values: vec![0.0; k],
            total_value: 0.0,
            per_epoch_payoffs: vec![vec![0.0; n]; k],
            per_player_cumulative: vec![0.0; n],
            stability: None,
            survivors,
        },
    }
}

/// Single-epoch value of `coalition` under the dynamic planner, for cross-checks.
pub fn single_epoch_plan_value(scenario: &Scenario, coalition: Coalition, load: &LoadMatrix) -> f64 {
    let inputs = EpochInputs {
        epoch: load.epoch,
        loads: load.clone(),
        c_prev: 0.0,
    };
    let cache = PlanCache::new();
    EpochGame::new(scenario, &inputs, &cache).value(coalition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loadgen::{generate_loads, LoadParams};
    use crate::model::{SpProfile, UtilityParams, OpportunityCostModel};
    use approx::assert_relative_eq;

    fn constant_scenario(levels: &[f64], epochs: usize, slots: usize) -> Scenario {
        let mut s = Scenario::default_mec(slots);
        s.grid = crate::model::TimeGrid::new(epochs, slots, 1.0, s.cost.delta_hours);
        s.sps = levels
            .iter()
            .map(|&b| SpProfile {
                utility: UtilityParams::default(),
                load: LoadParams::constant(b, epochs),
                opportunity: OpportunityCostModel::uniform(0.0, 0.0),
            })
            .collect();
        s
    }

    fn loads(s: &Scenario) -> Vec<LoadMatrix> {
        (1..=s.grid.epochs).map(|k| generate_loads(s, k)).collect()
    }

    #[test]
    fn zero_load_deploys_nothing() {
        let s = constant_scenario(&[0.0], 3, 24);
        let l = loads(&s);
        for scheme in [BaselineScheme::Static, BaselineScheme::Update] {
            let p = solve(scheme, &s, Coalition::from_members([0, 1]), &l).unwrap();
            assert_eq!(p.total_value, 0.0);
            assert!(p.capacities.iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn degenerate_coalition_is_an_error() {
        let s = constant_scenario(&[1e7], 2, 24);
        let l = loads(&s);
        assert!(solve_static(&s, Coalition::singleton(0), &l).is_err());
        assert!(solve_update(&s, Coalition::singleton(1), &l).is_err());
    }

    #[test]
    fn static_capacity_is_constant_and_values_sum() {
        let s = Scenario::default_mec(24);
        let l = loads(&s);
        let p = solve_static(&s, s.grand_coalition(), &l).unwrap();
        assert!(p.capacities.windows(2).all(|w| w[0] == w[1]));
        assert!(p.capacities[0] > 0.0);
        let refs: Vec<&LoadMatrix> = l.iter().collect();
        let horizon = CapacityProblem::new(&s, s.grand_coalition(), &refs);
        let direct = horizon.welfare(p.capacities[0])
            - cost_unchecked(p.capacities[0], 0.0, &s.cost)
            - (l.len() - 1) as f64 * s.cost.maintenance_per_vcore() * p.capacities[0];
        assert_relative_eq!(p.total_value, direct, max_relative = 1e-9);
    }

    #[test]
    fn single_sp_static_matches_grid_search() {
        let mut s = constant_scenario(&[1e6], 1, 4);
        s.cost = CostParams {
            gamma: 50.0,
            ..CostParams::default()
        };
        let l = loads(&s);
        let p = solve_static(&s, Coalition::from_members([0, 1]), &l).unwrap();
        let u = &s.sps[0].utility;
        let per_slot = |h: f64| u.beta * 1e6 * s.grid.scale_factor * (1.0 - (-u.xi * h).exp());
        let mut best = 0.0f64;
        for j in 1..=20_000 {
            let c = j as f64 * 0.01;
            let v = 4.0 * per_slot(c) - cost_unchecked(c, 0.0, &s.cost);
            best = best.max(v);
        }
        assert!(best > 0.0);
        assert!((p.total_value - best).abs() <= 5e-3 * best, "{} vs {best}", p.total_value);
    }

    #[test]
    fn identical_epochs_without_deploy_charge_agree() {
        // with d = 0 the one-off charge no longer favours the long view
        let mut s = constant_scenario(&[1e7, 6e6], 4, 24);
        s.cost.d = 0.0;
        s.cost.kappa = 0.0;
        let l = loads(&s);
        let c = s.grand_coalition();
        let st = solve_static(&s, c, &l).unwrap();
        let up = solve_update(&s, c, &l).unwrap();
        assert!(up.capacities.windows(2).all(|w| w[0] == w[1]));
        assert_relative_eq!(st.total_value, up.total_value, max_relative = 1e-9);
        assert_relative_eq!(st.capacities[0], up.capacities[0], max_relative = 1e-8);
    }

    #[test]
    fn constant_loads_update_moves_once() {
        let s = constant_scenario(&[1e7, 6e6], 5, 24);
        let l = loads(&s);
        let up = solve_update(&s, s.grand_coalition(), &l).unwrap();
        assert!(up.capacities[0] > 0.0);
        assert!(up.capacities.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn one_epoch_update_equals_planner() {
        let s = Scenario::default_mec(24);
        let l = vec![generate_loads(&s, 1)];
        let c = Coalition::from_members([0, 2, 4]);
        let up = solve_update(&s, c, &l).unwrap();
        assert_eq!(up.total_value, single_epoch_plan_value(&s, c, &l[0]));
    }

    #[test]
    fn selection_grand_when_free_and_none_when_costly() {
        let s = constant_scenario(&[1e7, 8e6], 3, 24);
        let l = loads(&s);
        let zero = vec![vec![0.0; 3]; 3];
        for scheme in [BaselineScheme::Static, BaselineScheme::Update] {
            let r = select_baseline_coalition(scheme, &s, &l, &zero).unwrap();
            assert!(r.participated);
            assert_eq!(r.coalition, s.grand_coalition());
            let split: f64 = r.per_player_cumulative.iter().sum();
            assert_relative_eq!(split, r.total_value, max_relative = 1e-9);

            let huge = vec![vec![0.0, 1e12, 1e12]; 3];
            let r = select_baseline_coalition(scheme, &s, &l, &huge).unwrap();
            assert!(!r.participated);
            assert_eq!(r.total_value, 0.0);
            assert!(r.survivors.is_empty());
        }
    }
}
