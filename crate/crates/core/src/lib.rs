//! Seeded simulation of co-investment in shared edge capacity by one
//! infrastructure provider (InP) and several service providers (SPs).
//!
//! Each epoch, coalitions plan capacity and per-slot allocations, split the
//! resulting value by Shapley value, and move between coalitions through
//! budget-balanced entry fees, exit penalties and compensations. Static and
//! update schemes with fixed membership serve as baselines.

pub mod baselines;
pub mod coalition;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod harness;
pub mod loadgen;
pub mod model;
pub mod planner;

pub use coalition::Coalition;
pub use error::{Error, Result};
pub use model::{CostParams, EpsilonPolicy, Scenario};

#[cfg(test)]
mod tests;
