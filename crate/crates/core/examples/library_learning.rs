//! A run that has to plan for a missing sub-goal, then a second run that
//! starts from the saved library and does not.

use std::path::PathBuf;

use rtbdi::bdi::GoalPlanLibrary;
use rtbdi::harness::{Scenario, Simulation};

fn main() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/learning.json");
    let mut first = Simulation::new(Scenario::load(&path).unwrap()).unwrap();
    let r1 = first.run_to_end();
    println!("run 1: planner calls {}, library {} -> {}", r1.planner_calls, r1.library_size_start, r1.library_size_end);

    let saved = first.agent.library.to_json();
    let learned = GoalPlanLibrary::from_json(&saved, first.model()).unwrap();
    for p in learned.plans() {
        println!("  {} for {} (makespan {})", p.id, p.goal_id, p.makespan);
    }

    let mut second = Simulation::with_options(Scenario::load(&path).unwrap(), None, Some(&learned)).unwrap();
    let r2 = second.run_to_end();
    println!("run 2: planner calls {}, library {} -> {}", r2.planner_calls, r2.library_size_start, r2.library_size_end);
}
