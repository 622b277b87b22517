//! Runs a shipped scenario and prints its log and summary.
//!
//!     cargo run --example run_scenario -- coordinator

use std::path::PathBuf;

use rtbdi::harness::{Scenario, Simulation};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "execution1".into());
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"));
    let scenario = Scenario::load(&path).expect("scenario");
    let mut sim = Simulation::new(scenario).expect("valid scenario");
    let report = sim.run_to_end();
    print!("{}", sim.log_text());
    println!();
    println!("finished at tick {}", sim.tick);
    println!("achieved {} dropped {}", report.achieved, report.dropped);
    println!(
        "planner calls {}, library {} -> {}",
        report.planner_calls, report.library_size_start, report.library_size_end
    );
    println!("peak load {}", sim.trace().max_load());
}
