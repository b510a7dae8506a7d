//! Reference implementations for cross-checks. Plain numbers in, plain
//! numbers out; nothing here calls into the library.
#![allow(dead_code)]

use itertools::Itertools;

/// Capacity cost written out term by term.
pub fn reference_cost(c_new: f64, c_prev: f64, d: f64, kappa: f64, gamma: f64, maintenance: f64) -> f64 {
    let mut total = maintenance * c_new;
    if c_new > c_prev {
        total += d * (c_new - c_prev);
    }
    if c_new < c_prev {
        total -= kappa * (c_prev - c_new);
    }
    if c_new != c_prev {
        total += gamma;
    }
    total
}

/// One epoch of the planning problem as raw numbers.
#[derive(Debug, Clone)]
pub struct GridInstance {
    /// `[slot][sp]` revenue ceiling `beta * load * scale`.
    pub amplitudes: Vec<Vec<f64>>,
    pub xis: Vec<f64>,
    pub d: f64,
    pub kappa: f64,
    pub gamma: f64,
    /// Maintenance of one vcore over the interval.
    pub maintenance: f64,
    /// Must lie on the search grid.
    pub c_prev: f64,
}

// best[c] = max over allocations of at most c grid units across the SPs
fn slot_table(amplitudes: &[f64], xis: &[f64], step: f64, n: usize) -> Vec<f64> {
    let mut best = vec![0.0; n + 1];
    for (a, xi) in amplitudes.iter().zip(xis) {
        let u: Vec<f64> = (0..=n).map(|j| a * (1.0 - (-xi * j as f64 * step).exp())).collect();
        let mut next = vec![f64::NEG_INFINITY; n + 1];
        for c in 0..=n {
            for j in 0..=c {
                let v = best[c - j] + u[j];
                if v > next[c] {
                    next[c] = v;
                }
            }
        }
        best = next;
    }
    for c in 1..=n {
        if best[c - 1] > best[c] {
            best[c] = best[c - 1];
        }
    }
    best
}

/// Exhaustive search over capacity and allocations on a `step` grid up to
/// `c_max`. Returns `(value, capacity)`.
pub fn grid_search_plan(inst: &GridInstance, step: f64, c_max: f64) -> (f64, f64) {
    let n = (c_max / step).round() as usize;
    let p = (inst.c_prev / step).round() as usize;
    assert!((p as f64 * step - inst.c_prev).abs() < 1e-9, "c_prev off grid");
    let mut welfare = vec![0.0; n + 1];
    for slot in &inst.amplitudes {
        for (w, s) in welfare.iter_mut().zip(slot_table(slot, &inst.xis, step, n)) {
            *w += s;
        }
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    for (j, w) in welfare.iter().enumerate() {
        let c = if j == p { inst.c_prev } else { j as f64 * step };
        let v = w - reference_cost(c, inst.c_prev, inst.d, inst.kappa, inst.gamma, inst.maintenance);
        if v > best.0 {
            best = (v, c);
        }
    }
    best
}

pub fn mask_of(members: &[usize]) -> u32 {
    members.iter().fold(0, |m, &i| m | (1 << i))
}

pub fn members_of(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask & (1 << i) != 0).collect()
}

/// Average marginal contribution over every ordering of `members`.
/// Returned in the order of `members`.
pub fn permutation_shapley(members: &[usize], v: &dyn Fn(u32) -> f64) -> Vec<f64> {
    let mut acc = vec![0.0; members.len()];
    let mut count = 0usize;
    for order in members.iter().copied().permutations(members.len()) {
        let mut mask = 0u32;
        let mut prev = v(0);
        for i in order {
            mask |= 1 << i;
            let now = v(mask);
            let pos = members.iter().position(|&m| m == i).unwrap();
            acc[pos] += now - prev;
            prev = now;
        }
        count += 1;
    }
    acc.iter().map(|a| a / count as f64).collect()
}

/// `sum_{i in T} x_i >= v(T) - tol` for every nonempty `T` inside `members`.
pub fn in_core(members: &[usize], x: &[f64], v: &dyn Fn(u32) -> f64, tol: f64) -> bool {
    let n = members.len();
    for pick in 1u32..(1 << n) {
        let mut mask = 0;
        let mut share = 0.0;
        for (b, &i) in members.iter().enumerate() {
            if pick & (1 << b) != 0 {
                mask |= 1 << i;
                share += x[b];
            }
        }
        if share < v(mask) - tol {
            return false;
        }
    }
    true
}

/// Whether some slack in `[0, 1]` admits balanced, non-negative fees,
/// penalties and compensations meeting entry and exit rationality and the
/// compensation floors. `x_new` and `x_cf` are indexed by player.
pub fn balanced_transfers_exist(
    s_new: &[usize],
    s_prev: &[usize],
    x_new: &[f64],
    x_cf: &[f64],
    v_out: &[f64],
    tol: f64,
) -> bool {
    let entrants: Vec<usize> = s_new.iter().copied().filter(|i| !s_prev.contains(i)).collect();
    let leavers: Vec<usize> = s_prev.iter().copied().filter(|i| !s_new.contains(i)).collect();
    let stayers: Vec<usize> = s_new.iter().copied().filter(|i| s_prev.contains(i)).collect();
    let floor: f64 = stayers.iter().map(|&i| 0f64.max(x_cf[i] - x_new[i]).max(v_out[i] - x_new[i])).sum();
    let steps = 1000;
    (0..=steps).any(|j| {
        let eps = j as f64 / steps as f64;
        let mut pot = 0.0;
        for &i in &entrants {
            let f = (1.0 - eps) * (x_new[i] - v_out[i]);
            if f < -tol || x_new[i] - f < v_out[i] - tol {
                return false;
            }
            pot += f;
        }
        for &i in &leavers {
            let p = (1.0 - eps) * (v_out[i] - x_cf[i]);
            if p < -tol || x_cf[i] > v_out[i] - p + tol {
                return false;
            }
            pot += p;
        }
        if stayers.is_empty() {
            pot.abs() <= tol
        } else {
            pot >= floor - tol
        }
    })
}

/// Membership test for the dynamic-compatible set, from first principles:
/// Shapley by permutations, core by enumeration, individual rationality
/// against `v_out`, then transfer existence against the previous coalition.
pub fn dynamic_compatible(s_new: u32, s_prev: u32, n_players: usize, v: &dyn Fn(u32) -> f64, v_out: &[f64]) -> bool {
    let members = members_of(s_new);
    let x = permutation_shapley(&members, v);
    let value = v(s_new);
    let tol = 1e-9 * value.abs().max(1.0);
    if (x.iter().sum::<f64>() - value).abs() > tol || !in_core(&members, &x, v, tol) {
        return false;
    }
    if members.iter().zip(&x).any(|(&i, &xi)| xi < v_out[i] - tol) {
        return false;
    }
    let mut x_new = vec![f64::NAN; n_players];
    for (&i, &xi) in members.iter().zip(&x) {
        x_new[i] = xi;
    }
    let prev = members_of(s_prev);
    let mut x_cf = vec![f64::NAN; n_players];
    if !prev.is_empty() {
        for (&i, xi) in prev.iter().zip(permutation_shapley(&prev, v)) {
            x_cf[i] = xi;
        }
    }
    let scale: f64 = members.iter().map(|&i| x_new[i].abs()).chain(prev.iter().map(|&i| x_cf[i].abs())).sum();
    balanced_transfers_exist(&members, &prev, &x_new, &x_cf, v_out, 1e-9 * scale.max(1.0))
}
