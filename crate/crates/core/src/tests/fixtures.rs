use crate::loadgen::{LoadMatrix, LoadParams};
use crate::model::{CostParams, InpProfile, OpportunityCostModel, Scenario, SpProfile, TimeGrid, UtilityParams};
use crate::EpsilonPolicy;

/// A scenario whose SPs have the given `(beta, xi)`; loads are supplied
/// separately as matrices.
pub fn scenario(sps: &[(f64, f64)], slots: usize, epochs: usize) -> Scenario {
    let cost = CostParams::default();
    Scenario {
        inp: InpProfile::default(),
        sps: sps
            .iter()
            .map(|&(beta, xi)| SpProfile {
                utility: UtilityParams { beta, xi },
                load: LoadParams::constant(0.0, epochs),
                opportunity: OpportunityCostModel::uniform(0.0, 0.0),
            })
            .collect(),
        grid: TimeGrid::new(epochs, slots, 1.0, cost.delta_hours),
        cost,
        epsilon_policy: EpsilonPolicy::MidpointOfFeasible,
        seed: 0,
    }
}

pub fn matrix(epoch: usize, rows: Vec<Vec<f64>>) -> LoadMatrix {
    LoadMatrix { epoch, rows, clamped: 0 }
}

/// Staggered sinusoidal loads for a small two-SP instance.
pub fn two_sp_loads(epochs: usize, slots: usize) -> Vec<LoadMatrix> {
    (1..=epochs)
        .map(|k| {
            let rows = (0..2)
                .map(|i| {
                    (0..slots)
                        .map(|t| {
                            let level = [4.0e6, 2.5e6][i] * (1.0 + 0.3 * ((k + i) % 3) as f64);
                            let phase = (t as f64 + 3.0 * i as f64) / slots as f64 * std::f64::consts::TAU;
                            level * (1.0 + 0.5 * phase.sin())
                        })
                        .collect()
                })
                .collect();
            matrix(k, rows)
        })
        .collect()
}
