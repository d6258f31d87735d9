//! Configured runs: simulate, sweep, verify and pulse planning.

pub mod config;
pub mod output;
pub mod plan;
pub mod simulate;
pub mod sweep;
pub mod units;
pub mod verify;

pub use config::{load_config, parse_config, RunKind, ScenarioConfig};
pub use plan::{plan_pulse, run_plan, PulsePlan};
pub use simulate::{run_simulate, simulate, SimulateOutput};
pub use sweep::{run_sweep, sweep, SweepRow};
pub use verify::{run_verify, verify, CheckResult, VerifyReport};
