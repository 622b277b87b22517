//! Scenario loading, the deterministic tick loop, run logs and traces,
//! the network service and the command line.

pub mod cli;
mod scenario;
pub mod serve;
mod sim;

pub use scenario::{Scenario, ScenarioError};
pub use sim::{loads, trace_csv, GoalOutcome, Report, Simulation};
