//! Steps the agent tick by tick and shows its goals and intentions at
//! every reasoning cycle.

use std::path::PathBuf;

use rtbdi::events;
use rtbdi::harness::{Scenario, Simulation};

fn main() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/execution1.json");
    let mut sim = Simulation::new(Scenario::load(&path).unwrap()).unwrap();
    while !sim.is_finished() {
        let t = sim.tick;
        let cycle = sim.step().iter().any(|e| e.name == events::REASONING_CYCLE);
        if !cycle {
            continue;
        }
        println!("-- tick {t}");
        for g in &sim.agent.goals {
            println!("   goal {} {:?} deadline {}", g.key(), g.status, g.absolute_deadline);
        }
        for i in &sim.agent.intentions {
            let running: Vec<String> = i.running.values().map(|r| format!("{} {}", r.actor, r.action)).collect();
            println!("   {} ({}) {:?} running [{}]", i.id, i.plan.id, i.status, running.join(", "));
        }
        println!("   {}", sim.agent.progress_summary());
    }
}
