//! Scenario runner, sweeps and the live control-plane server.

pub mod engine;
pub mod error;
pub mod run;
pub mod scenario;
pub mod serve;
pub mod sweep;

pub use error::{exit, CliError};
pub use run::{run, simulate, RunSummary};
pub use scenario::{load_scenario, parse_scenario, ScenarioConfig};
