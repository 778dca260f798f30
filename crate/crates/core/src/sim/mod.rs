//! Whole-fabric runs: configuration, the event loop and its results.

pub mod config;
pub mod world;

pub use config::{Impairments, LinkLoss, SimConfig, SwitchConfig, TelemetryConfig, TransportKind, WorkloadSpec};
pub use world::{RunResult, RunStats, Simulation};

use crate::error::SimError;

/// Validates `cfg`, runs it to completion and returns the measurements.
pub fn run(cfg: SimConfig) -> Result<RunResult, SimError> {
    Simulation::new(cfg)?.run()
}
