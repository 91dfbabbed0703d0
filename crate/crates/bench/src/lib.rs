//! Scenario configs, the forced van der Pol benchmark and report emission
//! for `periodic-cert`, plus the `pcert` command-line front end.

pub mod config;
pub mod custom;
pub mod expr;
pub mod report;
pub mod scenario;

pub use config::ScenarioConfig;
pub use report::{emit_report, Format, RunReport};
pub use scenario::{analyze, run_vdp, run_vdp_scenario, scan_mu};
