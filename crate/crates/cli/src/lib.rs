//! Scenario runner for the Madelung entropy diagnostics.

pub mod compare;
pub mod config;
pub mod error;
pub mod output;
pub mod report;
pub mod runner;
pub mod spectrum;

pub use config::ScenarioConfig;
pub use error::{RunError, RunResult};
pub use report::RunReport;
pub use runner::{run_scenario, simulate};
