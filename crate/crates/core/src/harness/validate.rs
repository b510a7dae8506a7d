//! Invariant checks over finished runs: transfer rules, regulator choice,
//! slack invariance and scheme dominance.

use serde::Serialize;

use crate::baselines::{solve_static, solve_update, BaselineResult};
use crate::coalition::Coalition;
use crate::dynamics::{enumerate_compatible, DynamicRun, EpochOutcome};
use crate::game::tolerance;
use crate::loadgen::LoadMatrix;
use crate::model::{EpsilonPolicy, Scenario};
use crate::planner::{EpochGame, EpochInputs, PlanCache};

use super::experiment::RunBundle;

/// Number of evenly spaced slack values checked besides the selected one.
pub const EPSILON_SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: &'static str,
    pub epoch: Option<usize>,
    pub detail: String,
}

fn violation(check: &'static str, epoch: usize, detail: String) -> Violation {
    Violation {
        check,
        epoch: Some(epoch),
        detail,
    }
}

fn sampled_epsilons(selected: f64) -> Vec<f64> {
    let mut eps: Vec<f64> = (0..EPSILON_SAMPLES).map(|j| j as f64 / (EPSILON_SAMPLES - 1) as f64).collect();
    eps.push(selected);
    eps
}

/// Transfer rules of one epoch: balance, signs, floors, entry and exit rationality.
pub fn check_epoch_transfers(e: &EpochOutcome) -> Vec<Violation> {
    let mut out = Vec::new();
    let k = e.epoch;
    let t = &e.transfers;
    let scale: f64 = e.allocation.payoffs.iter().chain(&e.counterfactual.payoffs).map(|(_, x)| x.abs()).sum();
    let tol = tolerance(scale);

    let imbalance = t.total_compensations() - t.total_fees() - t.total_penalties();
    if imbalance.abs() > tol {
        out.push(violation("budget_balance", k, format!("sum c - sum f - sum p = {imbalance}")));
    }
    for (kind, list) in [("fee", &t.entry_fees), ("penalty", &t.exit_penalties), ("compensation", &t.compensations)] {
        for &(i, v) in list.iter() {
            if v < -tol {
                out.push(violation("non_negative", k, format!("{kind} of player {i} is {v}")));
            }
        }
    }

    let entrants = e.coalition.difference(e.previous);
    let leavers = e.previous.difference(e.coalition);
    let persistent = e.coalition.intersection(e.previous);
    for i in persistent.members() {
        let x = e.allocation.get(i).unwrap_or(f64::NAN);
        let x_cf = e.counterfactual.get(i).unwrap_or(f64::NAN);
        let floor = 0.0f64.max(x_cf - x).max(e.v_out[i] - x);
        if !(t.compensation(i) >= floor - tol) {
            out.push(violation(
                "compensation_floor",
                k,
                format!("player {i}: c = {} < floor {floor}", t.compensation(i)),
            ));
        }
    }
    for eps in sampled_epsilons(t.epsilon) {
        for i in entrants.members() {
            let x = e.allocation.get(i).unwrap_or(f64::NAN);
            let fee = (1.0 - eps) * (x - e.v_out[i]);
            if !(x - fee >= e.v_out[i] - tol) {
                out.push(violation("entry_rationality", k, format!("player {i} at eps {eps}: {} < {}", x - fee, e.v_out[i])));
            }
        }
        for i in leavers.members() {
            let x_cf = e.counterfactual.get(i).unwrap_or(f64::NAN);
            let penalty = (1.0 - eps) * (e.v_out[i] - x_cf);
            if !(x_cf <= e.v_out[i] - penalty + tol) {
                out.push(violation("exit_rationality", k, format!("player {i} at eps {eps}: {x_cf} > {}", e.v_out[i] - penalty)));
            }
        }
    }
    for i in entrants.members() {
        let x = e.allocation.get(i).unwrap_or(f64::NAN);
        if !(x - t.fee(i) >= e.v_out[i] - tol) {
            out.push(violation("entry_rationality", k, format!("player {i} pays {} from {x}", t.fee(i))));
        }
    }
    for i in leavers.members() {
        let x_cf = e.counterfactual.get(i).unwrap_or(f64::NAN);
        if !(x_cf <= e.v_out[i] - t.penalty(i) + tol) {
            out.push(violation("exit_rationality", k, format!("player {i} pays {} leaving {x_cf}", t.penalty(i))));
        }
    }
    out
}

/// Every invariant of a dynamic trajectory. `loads[k-1]` and `v_out[k-1]`
/// must be the inputs the run used.
pub fn check_dynamic_run(scenario: &Scenario, loads: &[LoadMatrix], run: &DynamicRun) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = scenario.n_players();
    let cache = PlanCache::new();
    for e in &run.epochs {
        let k = e.epoch;
        if !e.coalition.is_empty() {
            if !e.coalition.is_viable() {
                out.push(violation("veto", k, format!("coalition {} lacks the InP or an SP", e.coalition)));
            }
            let tol = tolerance(e.value);
            if (e.allocation.total() - e.value).abs() > tol {
                out.push(violation("efficiency", k, format!("sum x = {} vs v = {}", e.allocation.total(), e.value)));
            }
            let net: f64 = e.net_payoffs(n).iter().sum();
            if (net - e.value).abs() > tolerance(e.allocation.payoffs.iter().map(|(_, x)| x.abs()).sum()) {
                out.push(violation("net_sum", k, format!("sum net = {net} vs v = {}", e.value)));
            }
            if k == 1 && (e.transfers.total_fees() != 0.0 || e.transfers.total_compensations() != 0.0) {
                out.push(violation("first_epoch_transfers", k, "transfers in epoch 1".into()));
            }
            out.extend(check_epoch_transfers(e));
        }

        // rescan the epoch under several slack policies
        let inputs = EpochInputs {
            epoch: k,
            loads: loads[k - 1].clone(),
            c_prev: e.c_prev,
        };
        let game = EpochGame::new(scenario, &inputs, &cache);
        let mut sets: Vec<(String, Vec<Coalition>)> = Vec::new();
        for (name, policy) in [
            ("policy", scenario.epsilon_policy),
            ("eps=0", EpsilonPolicy::Fixed(0.0)),
            ("eps=0.5", EpsilonPolicy::Fixed(0.5)),
        ] {
            let scan = enumerate_compatible(&game, e.previous, &e.v_out, policy);
            if name == "policy" {
                for c in scan.compatible() {
                    if c.value > e.value + tolerance(c.value.abs().max(e.value.abs())) {
                        out.push(violation("max_value", k, format!("{} worth {} beats selected {}", c.coalition, c.value, e.value)));
                    }
                }
            }
            sets.push((name.to_string(), scan.compatible_set()));
        }
        if sets[0].1 != e.compatible {
            out.push(violation("compatible_set", k, "recorded compatible set differs from rescan".into()));
        }
        for (name, set) in &sets[1..] {
            if *set != sets[0].1 {
                out.push(violation("epsilon_invariance", k, format!("compatible set changes under {name}")));
            }
        }
    }
    let v_dyn: f64 = run.epochs.iter().map(|e| e.value).sum();
    if (v_dyn - run.v_dyn).abs() > tolerance(v_dyn) {
        out.push(Violation {
            check: "v_dyn",
            epoch: None,
            detail: format!("{} vs sum {v_dyn}", run.v_dyn),
        });
    }
    out
}

/// `v_upd(S) >= v_stat(S) - 1e-6 * max(1, |v_stat(S)|)` for every viable coalition.
pub fn check_scheme_dominance(scenario: &Scenario, loads: &[LoadMatrix]) -> Vec<Violation> {
    let mut out = Vec::new();
    for s in scenario.grand_coalition().subsets().filter(|c| c.is_viable()) {
        let (Ok(st), Ok(up)) = (solve_static(scenario, s, loads), solve_update(scenario, s, loads)) else {
            out.push(Violation {
                check: "scheme_dominance",
                epoch: None,
                detail: format!("{s}: baseline solve failed"),
            });
            continue;
        };
        if up.total_value < st.total_value - 1e-6 * st.total_value.abs().max(1.0) {
            out.push(Violation {
                check: "scheme_dominance",
                epoch: None,
                detail: format!("{s}: update {} < static {}", up.total_value, st.total_value),
            });
        }
        if st.capacities.windows(2).any(|w| w[0] != w[1]) {
            out.push(Violation {
                check: "static_constancy",
                epoch: None,
                detail: format!("{s}: static capacity varies"),
            });
        }
    }
    out
}

/// Horizon efficiency of a baseline split.
pub fn check_baseline(result: &BaselineResult) -> Vec<Violation> {
    let split: f64 = result.per_player_cumulative.iter().sum();
    if (split - result.total_value).abs() > tolerance(result.total_value) {
        vec![Violation {
            check: "baseline_efficiency",
            epoch: None,
            detail: format!("{:?}: split {split} vs value {}", result.scheme, result.total_value),
        }]
    } else {
        Vec::new()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BundleReport {
    pub regime: String,
    pub run: usize,
    pub seed: u64,
    pub violations: Vec<Violation>,
}

/// Dynamic-run invariants and scheme dominance for one bundle.
pub fn check_bundle(bundle: &RunBundle) -> BundleReport {
    let mut violations = Vec::new();
    if let Some(d) = &bundle.dynamic {
        violations.extend(check_dynamic_run(&bundle.scenario, &bundle.loads, d));
    }
    violations.extend(check_scheme_dominance(&bundle.scenario, &bundle.loads));
    BundleReport {
        regime: bundle.regime.name.clone(),
        run: bundle.run,
        seed: bundle.seed,
        violations,
    }
}
