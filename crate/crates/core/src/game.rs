//! Shapley allocation and stability verification for TU games over
//! [`Coalition`] bitmasks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coalition::{Coalition, MAX_PLAYERS};
use crate::planner::EpochGame;

pub trait CharacteristicFunction {
    fn value(&self, coalition: Coalition) -> f64;
}

impl<F: Fn(Coalition) -> f64> CharacteristicFunction for F {
    fn value(&self, coalition: Coalition) -> f64 {
        self(coalition)
    }
}

impl CharacteristicFunction for EpochGame<'_> {
    fn value(&self, coalition: Coalition) -> f64 {
        EpochGame::value(self, coalition)
    }
}

/// Absolute slack used by every stability inequality.
pub fn tolerance(reference: f64) -> f64 {
    1e-9 * reference.abs().max(1.0)
}

/// Payoff shares of one coalition at one epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub epoch: usize,
    pub coalition: Coalition,
    /// `(player index, payoff)` in increasing player order.
    pub payoffs: Vec<(usize, f64)>,
}

impl Allocation {
    pub fn empty(epoch: usize) -> Self {
        Allocation {
            epoch,
            coalition: Coalition::EMPTY,
            payoffs: Vec::new(),
        }
    }

    pub fn get(&self, player: usize) -> Option<f64> {
        self.payoffs.iter().find(|(i, _)| *i == player).map(|(_, x)| *x)
    }

    pub fn total(&self) -> f64 {
        self.payoffs.iter().map(|(_, x)| x).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.payoffs.is_empty()
    }
}

/// Values of every subset of `coalition`, indexed by the compressed mask
/// whose bit `j` stands for the `j`-th member.
struct SubsetTable {
    members: Vec<usize>,
    values: Vec<f64>,
}

impl SubsetTable {
    fn new<V: CharacteristicFunction + ?Sized>(coalition: Coalition, value_fn: &V) -> Self {
        let members: Vec<usize> = coalition.members().collect();
        assert!(members.len() <= MAX_PLAYERS, "coalition too large for exhaustive enumeration");
        let values = (0..1usize << members.len())
            .map(|j| value_fn.value(Self::expand(&members, j)))
            .collect();
        SubsetTable { members, values }
    }

    fn expand(members: &[usize], compressed: usize) -> Coalition {
        Coalition::from_members(
            members
                .iter()
                .enumerate()
                .filter(|(b, _)| compressed & (1 << b) != 0)
                .map(|(_, &i)| i),
        )
    }

    fn n(&self) -> usize {
        self.members.len()
    }

    fn full(&self) -> usize {
        (1 << self.n()) - 1
    }
}

/// Weight `|T|! (n - |T| - 1)! / n!` indexed by `|T|`.
fn shapley_weights(n: usize) -> Vec<f64> {
    // 1 / (n * C(n-1, s)), built multiplicatively to stay exact for small n
    (0..n)
        .map(|s| {
            let mut binom = 1.0;
            for k in 0..s {
                binom = binom * (n - 1 - k) as f64 / (k + 1) as f64;
            }
            1.0 / (n as f64 * binom)
        })
        .collect()
}

/// Exact subset-formula Shapley values of `coalition` under `value_fn`.
pub fn shapley<V: CharacteristicFunction + ?Sized>(coalition: Coalition, value_fn: &V, epoch: usize) -> Allocation {
    if coalition.is_empty() {
        return Allocation::empty(epoch);
    }
    let table = SubsetTable::new(coalition, value_fn);
    shapley_from_table(&table, coalition, epoch)
}

fn shapley_from_table(table: &SubsetTable, coalition: Coalition, epoch: usize) -> Allocation {
    let n = table.n();
    let weights = shapley_weights(n);
    let payoffs = table
        .members
        .iter()
        .enumerate()
        .map(|(b, &player)| {
            let bit = 1usize << b;
            let x: f64 = (0..=table.full())
                .filter(|j| j & bit == 0)
                .map(|j| weights[j.count_ones() as usize] * (table.values[j | bit] - table.values[j]))
                .sum();
            (player, x)
        })
        .collect();
    Allocation {
        epoch,
        coalition,
        payoffs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupermodularViolation {
    pub smaller: Coalition,
    pub larger: Coalition,
    pub player: usize,
    /// `[v(R+j) - v(R)] - [v(S+j) - v(S)]`, positive when violated.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub coalition: Coalition,
    pub cr_ok: bool,
    /// Subset with the smallest `sum x - v(S')`, and that slack.
    pub cr_worst: Option<(Coalition, f64)>,
    pub gr_ok: bool,
    pub gr_gap: f64,
    pub sir_ok: bool,
    /// `(player, x_i - v_out_i)` per member.
    pub sir_slack: Vec<(usize, f64)>,
    pub supermodular_ok: bool,
    pub supermodular_exhaustive: bool,
    pub supermodular_worst: Option<SupermodularViolation>,
}

impl StabilityReport {
    /// CR, GR and SIR together.
    pub fn strongly_stable(&self) -> bool {
        self.cr_ok && self.gr_ok && self.sir_ok
    }
}

const SUPERMODULAR_SAMPLES: usize = 20_000;
const EXHAUSTIVE_SUPERMODULAR_MAX: usize = 6;

/// Verifies CR over all subsets, GR, SIR against `v_out` (indexed by player),
/// and scans supermodularity as a diagnostic.
pub fn check_stability<V: CharacteristicFunction + ?Sized>(alloc: &Allocation, value_fn: &V, v_out: &[f64]) -> StabilityReport {
    let coalition = alloc.coalition;
    let table = SubsetTable::new(coalition, value_fn);
    let n = table.n();
    let x: Vec<f64> = table
        .members
        .iter()
        .map(|&i| alloc.get(i).expect("allocation covers every member"))
        .collect();
    let v_full = table.values[table.full()];
    let tol = tolerance(v_full);

    let mut cr_worst: Option<(Coalition, f64)> = None;
    for j in 1..=table.full() {
        let share: f64 = (0..n).filter(|b| j & (1 << b) != 0).map(|b| x[b]).sum();
        let slack = share - table.values[j];
        if cr_worst.is_none_or(|(_, w)| slack < w) {
            cr_worst = Some((SubsetTable::expand(&table.members, j), slack));
        }
    }
    let cr_ok = cr_worst.is_none_or(|(_, s)| s >= -tol);

    let gr_gap = x.iter().sum::<f64>() - v_full;
    let gr_ok = gr_gap.abs() <= tol;

    let sir_slack: Vec<(usize, f64)> = table
        .members
        .iter()
        .zip(&x)
        .map(|(&i, &xi)| (i, xi - v_out[i]))
        .collect();
    let sir_ok = sir_slack.iter().all(|&(_, s)| s >= -tol);

    let (supermodular_worst, supermodular_exhaustive) = supermodularity_scan(&table, tol);

    StabilityReport {
        coalition,
        cr_ok,
        cr_worst,
        gr_ok,
        gr_gap,
        sir_ok,
        sir_slack,
        supermodular_ok: supermodular_worst.is_none(),
        supermodular_exhaustive,
        supermodular_worst,
    }
}

fn supermodularity_scan(table: &SubsetTable, tol: f64) -> (Option<SupermodularViolation>, bool) {
    let n = table.n();
    let full = table.full();
    let mut worst: Option<(usize, usize, usize, f64)> = None;
    let mut consider = |r: usize, s: usize, b: usize| {
        let bit = 1 << b;
        let gap = (table.values[r | bit] - table.values[r]) - (table.values[s | bit] - table.values[s]);
        if gap > tol && worst.is_none_or(|w| gap > w.3) {
            worst = Some((r, s, b, gap));
        }
    };
    let exhaustive = n <= EXHAUSTIVE_SUPERMODULAR_MAX;
    if exhaustive {
        for s in 0..=full {
            // every R subset of S
            let mut r = s;
            loop {
                for b in (0..n).filter(|b| s & (1 << b) == 0) {
                    consider(r, s, b);
                }
                if r == 0 {
                    break;
                }
                r = (r - 1) & s;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5E_4E_D0_0D);
        for _ in 0..SUPERMODULAR_SAMPLES {
            let b = rng.gen_range(0..n);
            let s = rng.gen_range(0..=full) & !(1 << b);
            let r = rng.gen_range(0..=full) & s;
            consider(r, s, b);
        }
    }
    let violation = worst.map(|(r, s, b, gap)| SupermodularViolation {
        smaller: SubsetTable::expand(&table.members, r),
        larger: SubsetTable::expand(&table.members, s),
        player: table.members[b],
        gap,
    });
    (violation, exhaustive)
}
