//! Config-driven experiment runner: named scenarios wiring the simulation
//! and optimization modules into reproducible runs with CSV/JSON artifacts.

mod catalog;
mod config;
mod output;
mod runner;

pub use catalog::{built_in_scenarios, find};
pub use config::{
    BellState, Experiment, GateKind, Grid, NoiseConfig, NoiseGridKind, OptimizerConfig,
    ScenarioConfig, SeedPolicy, SystemConfig,
};
pub use output::{OutputRecord, OutputSink, RunManifest};
pub use runner::run;
