//! Walks a plan tree by hand: which leaves become ready when, and what an
//! abort leaves behind.

use rtbdi::grid::{build_model, DomainConfig, WorldConfig};
use rtbdi::model::Formula;
use rtbdi::plan::{advance_frontier, nominal_schedule, Branch, Frontier, Plan, PlanNode};
use rtbdi::rational::Rational;

fn main() {
    let world: WorldConfig = serde_json::from_str(
        r#"{"width":3,"height":3,"robots":[{"id":"C1","at":[0,0]},{"id":"C2","at":[2,0]}],
            "resources":[],"warehouse":[1,2]}"#,
    )
    .unwrap();
    let model =
        build_model(&world, &DomainConfig::default(), &world.robot_ids(), &[], 0, Rational::from_integer(1)).unwrap();

    // C1 goes up twice while C2 waits 5 ticks and goes up once.
    let root = PlanNode::Parallel(vec![
        Branch {
            delay: 0,
            node: PlanNode::Sequential(vec![
                PlanNode::atomic("move_up(C1,c0_0)", "C1"),
                PlanNode::atomic("move_up(C1,c0_1)", "C1"),
            ]),
        },
        Branch { delay: 5, node: PlanNode::atomic("move_up(C2,c2_0)", "C2") },
    ]);
    let plan = Plan::new("P1", &Formula::True, root, Formula::True, Formula::True, &model).unwrap();
    println!("makespan {} cost {}", plan.makespan, plan.total_cost);
    for s in nominal_schedule(&plan.root, &model).unwrap() {
        println!("  {:?}", s);
    }

    let mut f = Frontier::new(&plan, 0);
    let mut running: Vec<(Vec<usize>, u64)> = Vec::new();
    for t in 0..=plan.makespan {
        let done: Vec<_> = running.iter().filter(|(_, end)| *end == t).map(|(p, _)| p.clone()).collect();
        running.retain(|(_, end)| *end != t);
        let (next, ready) = advance_frontier(&plan, &f, t, &done).unwrap();
        f = next;
        for r in ready {
            let path = r.path().clone();
            f.start(&plan, &path, t).unwrap();
            println!("tick {t}: start {path:?}");
            running.push((path, t + 10));
        }
        if f.is_done() {
            println!("tick {t}: done");
            break;
        }
    }

    let mut f = Frontier::new(&plan, 0);
    for r in f.ready(&plan, 5) {
        f.start(&plan, r.path(), 5).unwrap();
    }
    println!("abort at tick 5 stops {:?}", f.abort_all(&plan));
}
