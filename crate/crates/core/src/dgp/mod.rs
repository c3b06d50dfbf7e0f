//! Synthetic data generation: a multi-sector gravity trade model plus an
//! employment block with an imposed, known elasticity path.
//!
//! [`scenario`] holds the TOML-configurable generator settings, [`gravity`]
//! solves expenditure-share equilibria, and [`simulate`] turns a scenario
//! into a full set of panel files with a `truth.json` ground-truth record.

pub mod gravity;
pub mod scenario;
pub mod simulate;

pub use gravity::{power_matrices, solve_shares, solve_with_power, Equilibrium, GravityWorld};
pub use scenario::{
    ResponseConfig, ScenarioConfig, ShockConfig, StructureConfig, TaxonomyConfig, WorldConfig,
};
pub use simulate::{
    path_value, simulate_panel, InstrumentRelevance, SimulatedData, SyntheticTruth,
};
