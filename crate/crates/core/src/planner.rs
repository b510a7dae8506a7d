//! Per-epoch capacity planning for a coalition.
//!
//! For a fixed capacity `C` every slot is an independent water-filling
//! problem: maximise `sum_i a_i (1 - exp(-xi_i h_i))` subject to
//! `sum_i h_i <= C, h >= 0`, where `a_i = beta_i * l_i * scale_factor`. The
//! KKT solution is `h_i = max(0, ln(w_i / lambda) / xi_i)` with
//! `w_i = a_i * xi_i`, and the multiplier `lambda` is also `dW/dC` for that
//! slot. The outer problem over `C` is concave on each side of `c_prev`, so
//! the optimiser evaluates keep / increase / decrease branches separately.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::loadgen::LoadMatrix;
use crate::model::{cost_unchecked, CostParams, Scenario};

const MAX_ITERATIONS: usize = 200;
const CAPACITY_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
struct SlotEntry {
    sp: usize,
    amplitude: f64,
    ln_weight: f64,
    inv_xi: f64,
}

/// One slot's water-filling instance, entries sorted by decreasing weight.
#[derive(Debug, Clone)]
pub struct SlotProblem {
    entries: Vec<SlotEntry>,
    // prefix sums over the sorted entries: sum ln(w)/xi, sum 1/xi, sum a
    prefix_lnw: Vec<f64>,
    prefix_inv_xi: Vec<f64>,
    prefix_amp: Vec<f64>,
}

/// Multiplier and active-set size at a given capacity.
#[derive(Debug, Clone, Copy)]
struct SlotSolution {
    lambda: f64,
    ln_lambda: f64,
    active: usize,
}

impl SlotProblem {
    /// `(sp index, amplitude a_i, xi_i)` triples; entries with zero weight are dropped.
    pub fn new(items: impl IntoIterator<Item = (usize, f64, f64)>) -> Self {
        let mut entries: Vec<SlotEntry> = items
            .into_iter()
            .filter(|&(_, a, xi)| a > 0.0 && xi > 0.0)
            .map(|(sp, a, xi)| SlotEntry {
                sp,
                amplitude: a,
                ln_weight: (a * xi).ln(),
                inv_xi: 1.0 / xi,
            })
            .collect();
        entries.sort_by(|x, y| y.ln_weight.total_cmp(&x.ln_weight).then(x.sp.cmp(&y.sp)));
        let mut prefix_lnw = Vec::with_capacity(entries.len());
        let mut prefix_inv_xi = Vec::with_capacity(entries.len());
        let mut prefix_amp = Vec::with_capacity(entries.len());
        let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
        for e in &entries {
            s1 += e.ln_weight * e.inv_xi;
            s2 += e.inv_xi;
            s3 += e.amplitude;
            prefix_lnw.push(s1);
            prefix_inv_xi.push(s2);
            prefix_amp.push(s3);
        }
        SlotProblem {
            entries,
            prefix_lnw,
            prefix_inv_xi,
            prefix_amp,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn solve(&self, capacity: f64) -> Option<SlotSolution> {
        if self.entries.is_empty() {
            return None;
        }
        let n = self.entries.len();
        for m in 1..=n {
            let ln_lambda = (self.prefix_lnw[m - 1] - capacity) / self.prefix_inv_xi[m - 1];
            if m == n || ln_lambda >= self.entries[m].ln_weight {
                return Some(SlotSolution {
                    lambda: ln_lambda.exp(),
                    ln_lambda,
                    active: m,
                });
            }
        }
        unreachable!()
    }

    /// `dW/dC` of this slot (the common marginal utility).
    pub fn marginal(&self, capacity: f64) -> f64 {
        self.solve(capacity).map_or(0.0, |s| s.lambda)
    }

    /// Optimal welfare at `capacity`. Uses `a_i exp(-xi_i h_i) = lambda / xi_i`
    /// for active entries.
    pub fn welfare(&self, capacity: f64) -> f64 {
        match self.solve(capacity) {
            None => 0.0,
            Some(s) => self.prefix_amp[s.active - 1] - s.lambda * self.prefix_inv_xi[s.active - 1],
        }
    }

    /// `(sp, h)` pairs for the entries with positive weight.
    pub fn allocations(&self, capacity: f64) -> Vec<(usize, f64)> {
        let Some(s) = self.solve(capacity) else {
            return Vec::new();
        };
        self.entries
            .iter()
            .enumerate()
            .map(|(j, e)| {
                let h = if j < s.active {
                    ((e.ln_weight - s.ln_lambda) * e.inv_xi).max(0.0)
                } else {
                    0.0
                };
                (e.sp, h)
            })
            .collect()
    }
}

/// Water-filling for one slot.
///
/// `weights[i] = beta_i * l_i * xi_i * scale_factor`. Returns the allocation
/// for each input position; all zeros when `capacity == 0` or every weight is 0.
pub fn allocate_slot(weights: &[f64], xis: &[f64], capacity: f64) -> Vec<f64> {
    assert_eq!(weights.len(), xis.len());
    let problem = SlotProblem::new(
        weights
            .iter()
            .zip(xis)
            .enumerate()
            .map(|(i, (&w, &xi))| (i, if xi > 0.0 { w / xi } else { 0.0 }, xi)),
    );
    let mut out = vec![0.0; weights.len()];
    if capacity <= 0.0 {
        return out;
    }
    for (i, h) in problem.allocations(capacity) {
        out[i] = h;
    }
    out
}

/// The slot problems of a coalition over one epoch (or a whole horizon).
#[derive(Debug, Clone)]
pub struct CapacityProblem {
    pub coalition: Coalition,
    slots: Vec<SlotProblem>,
}

impl CapacityProblem {
    /// Builds the slot problems of `coalition` from one or more load matrices.
    pub fn new(scenario: &Scenario, coalition: Coalition, loads: &[&LoadMatrix]) -> Self {
        let scale = scenario.grid.scale_factor;
        let slots = loads
            .iter()
            .flat_map(|m| {
                (0..m.n_slots()).map(move |t| {
                    SlotProblem::new(coalition.sps().map(|sp| {
                        let u = &scenario.sp(sp).utility;
                        (sp, u.beta * m.sp_row(sp)[t] * scale, u.xi)
                    }))
                })
            })
            .collect();
        CapacityProblem { coalition, slots }
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    /// `dW/dC`, the sum of slot multipliers. At `C = 0` this is the one-sided
    /// derivative `sum_t max_i w_i`.
    pub fn marginal(&self, capacity: f64) -> f64 {
        self.slots.iter().map(|s| s.marginal(capacity)).sum()
    }

    /// `W(C)`: total optimal (scaled) utility at capacity `C`.
    pub fn welfare(&self, capacity: f64) -> f64 {
        self.slots.iter().map(|s| s.welfare(capacity)).sum()
    }

    /// Per-SP per-slot allocations, rows ordered as `coalition.sps()`.
    pub fn allocations(&self, capacity: f64) -> Vec<(usize, Vec<f64>)> {
        let sps: Vec<usize> = self.coalition.sps().collect();
        let mut rows: Vec<(usize, Vec<f64>)> = sps.iter().map(|&sp| (sp, vec![0.0; self.slots.len()])).collect();
        for (t, slot) in self.slots.iter().enumerate() {
            for (sp, h) in slot.allocations(capacity) {
                let r = sps.binary_search(&sp).expect("slot entry belongs to coalition");
                rows[r].1[t] = h;
            }
        }
        rows
    }

    /// Smallest power-of-two bracket `hi` with `marginal(hi) <= target`.
    fn bracket(&self, target: f64, diag: &mut PlanDiagnostics) -> Option<f64> {
        if target <= 0.0 {
            return None;
        }
        let mut hi = 1.0;
        for _ in 0..MAX_ITERATIONS {
            if self.marginal(hi) <= target {
                return Some(hi);
            }
            hi *= 2.0;
        }
        diag.iteration_cap_hit = true;
        None
    }

    /// Capacity where `dW/dC` falls to `target`, by bisection. Returns `None`
    /// when no finite root exists.
    pub fn capacity_for_marginal(&self, target: f64, diag: &mut PlanDiagnostics) -> Option<f64> {
        if self.marginal(0.0) <= target {
            return Some(0.0);
        }
        let mut hi = self.bracket(target, diag)?;
        let mut lo = 0.0;
        let tol = CAPACITY_REL_TOL * hi.max(1.0);
        let mut iterations = 0;
        while hi - lo > tol {
            if iterations == MAX_ITERATIONS {
                diag.iteration_cap_hit = true;
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.marginal(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
        }
        diag.bisection_iterations += iterations;
        Some(0.5 * (lo + hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Degenerate coalition: nothing planned.
    None,
    Keep,
    Increase,
    Decrease,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BranchValues {
    pub keep: f64,
    pub increase: Option<f64>,
    pub decrease: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PlanDiagnostics {
    /// Smallest capacity whose marginal welfare no longer covers maintenance.
    pub c_max: f64,
    pub bisection_iterations: usize,
    pub iteration_cap_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanResult {
    pub coalition: Coalition,
    pub capacity: f64,
    pub c_prev: f64,
    /// `(sp index, per-slot vcores)` for each SP in the coalition.
    pub allocations: Vec<(usize, Vec<f64>)>,
    pub gross_utility: f64,
    pub total_cost: f64,
    pub value: f64,
    pub branch: Branch,
    pub branch_values: BranchValues,
    pub diagnostics: PlanDiagnostics,
}

impl PlanResult {
    fn degenerate(coalition: Coalition, c_prev: f64) -> Self {
        PlanResult {
            coalition,
            capacity: 0.0,
            c_prev,
            allocations: Vec::new(),
            gross_utility: 0.0,
            total_cost: 0.0,
            value: 0.0,
            branch: Branch::None,
            branch_values: BranchValues::default(),
            diagnostics: PlanDiagnostics::default(),
        }
    }
}

fn value_scale(values: &[f64]) -> f64 {
    values.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}

/// Solves the epoch planning problem for a viable coalition.
pub fn optimize_capacity(problem: &CapacityProblem, c_prev: f64, cost: &CostParams) -> Result<PlanResult> {
    if !problem.coalition.is_viable() {
        return Err(Error::domain(format!(
            "optimize_capacity needs the InP and at least one SP, got {}",
            problem.coalition
        )));
    }
    if !(c_prev >= 0.0) || !c_prev.is_finite() {
        return Err(Error::domain(format!("previous capacity must be >= 0, got {c_prev}")));
    }
    let maintenance = cost.maintenance_per_vcore();
    let mut diag = PlanDiagnostics::default();
    if maintenance > 0.0 {
        diag.c_max = problem.capacity_for_marginal(maintenance, &mut diag).unwrap_or(f64::INFINITY);
    } else {
        diag.c_max = f64::INFINITY;
    }

    let objective = |c: f64| problem.welfare(c) - cost_unchecked(c, c_prev, cost);

    // (i) keep exactly c_prev, no intervention charge
    let keep = objective(c_prev);

    // (ii) grow: concave on (c_prev, inf), stationary where W' = d + maintenance
    let increase = problem
        .capacity_for_marginal(cost.d + maintenance, &mut diag)
        .filter(|&c| c > c_prev)
        .map(|c| (c, objective(c)));

    // (iii) shrink: concave on [0, c_prev), stationary where W' = kappa + maintenance
    let decrease = if c_prev > 0.0 {
        match problem.capacity_for_marginal(cost.kappa + maintenance, &mut diag) {
            Some(c) if c < c_prev => Some((c, objective(c))),
            Some(_) => None,
            // W' never reaches the target: the objective keeps rising up to c_prev
            None => None,
        }
    } else {
        None
    };

    let branch_values = BranchValues {
        keep,
        increase: increase.map(|(_, v)| v),
        decrease: decrease.map(|(_, v)| v),
    };
    let mut best = (Branch::Keep, c_prev, keep);
    for (branch, cand) in [(Branch::Increase, increase), (Branch::Decrease, decrease)] {
        if let Some((c, v)) = cand {
            if v > best.2 {
                best = (branch, c, v);
            }
        }
    }
    // ties resolve to no intervention
    if best.0 != Branch::Keep && best.2 - keep <= 1e-9 * value_scale(&[keep, best.2]) {
        best = (Branch::Keep, c_prev, keep);
    }
    let (branch, capacity, _) = best;
    let gross_utility = problem.welfare(capacity);
    let total_cost = cost_unchecked(capacity, c_prev, cost);
    Ok(PlanResult {
        coalition: problem.coalition,
        capacity,
        c_prev,
        allocations: problem.allocations(capacity),
        gross_utility,
        total_cost,
        value: gross_utility - total_cost,
        branch,
        branch_values,
        diagnostics: diag,
    })
}

/// What the planner needs to know about one epoch.
#[derive(Debug, Clone)]
pub struct EpochInputs {
    pub epoch: usize,
    pub loads: LoadMatrix,
    pub c_prev: f64,
}

/// Characteristic-function planning: coalitions without the InP or without
/// any SP are worth exactly 0 and plan no capacity.
pub fn plan_value(scenario: &Scenario, coalition: Coalition, inputs: &EpochInputs) -> PlanResult {
    if !coalition.is_viable() {
        return PlanResult::degenerate(coalition, inputs.c_prev);
    }
    let problem = CapacityProblem::new(scenario, coalition, &[&inputs.loads]);
    optimize_capacity(&problem, inputs.c_prev, &scenario.cost).expect("viable coalition with validated inputs")
}

type CacheKey = (usize, u32, i64);

/// Plan cache keyed by `(epoch, coalition mask, c_prev quantised at 1e-6)`.
///
/// A cache is only valid for one scenario realisation (the key does not
/// include loads); create one per run.
#[derive(Debug, Default)]
pub struct PlanCache {
    inner: Mutex<HashMap<CacheKey, Arc<PlanResult>>>,
}

impl PlanCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(epoch: usize, coalition: Coalition, c_prev: f64) -> CacheKey {
        (epoch, coalition.bits(), (c_prev * 1e6).round() as i64)
    }

    pub fn get_or_plan(&self, scenario: &Scenario, coalition: Coalition, inputs: &EpochInputs) -> Arc<PlanResult> {
        let key = Self::key(inputs.epoch, coalition, inputs.c_prev);
        if let Some(hit) = self.inner.lock().expect("plan cache poisoned").get(&key) {
            return Arc::clone(hit);
        }
        // computed outside the lock; a concurrent duplicate insert is identical
        let plan = Arc::new(plan_value(scenario, coalition, inputs));
        let mut map = self.inner.lock().expect("plan cache poisoned");
        Arc::clone(map.entry(key).or_insert(plan))
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("plan cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The characteristic function of one epoch at a fixed prior capacity.
pub struct EpochGame<'a> {
    pub scenario: &'a Scenario,
    pub inputs: &'a EpochInputs,
    pub cache: &'a PlanCache,
}

impl<'a> EpochGame<'a> {
    pub fn new(scenario: &'a Scenario, inputs: &'a EpochInputs, cache: &'a PlanCache) -> Self {
        EpochGame { scenario, inputs, cache }
    }

    pub fn plan(&self, coalition: Coalition) -> Arc<PlanResult> {
        self.cache.get_or_plan(self.scenario, coalition, self.inputs)
    }

    pub fn value(&self, coalition: Coalition) -> f64 {
        self.plan(coalition).value
    }
}
