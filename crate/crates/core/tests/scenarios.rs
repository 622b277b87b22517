mod common;

use std::time::Instant;

use common::{capacity_violations, check_execution1, first_overlap, load, r, run, run_scenario, sha256_hex, SCENARIOS};
use rtbdi::bdi::{GoalStatus, IntentionStatus};
use rtbdi::events;
use rtbdi::exec::NotificationKind;
use rtbdi::grid::GridAction;
use rtbdi::harness::Simulation;
use rtbdi::model::{BeliefSet, Tick};
use rtbdi::plan::{PlanNode, TimeTriggeredPlan, TtEntry};
use rtbdi::planner::{validate_plan, PlanningProblem};

fn step_through(sim: &mut Simulation, t: Tick) {
    while sim.tick <= t && !sim.is_finished() {
        sim.step();
    }
}

fn problem<'a>(sim: &'a Simulation, b: BeliefSet, actors: &[&str]) -> PlanningProblem<'a> {
    let goal = sim.scenario.desires[0].goal.clone();
    let mut p = PlanningProblem::new(sim.model(), b, goal, 10_000);
    p.actors = actors.iter().map(|a| a.to_string()).collect();
    p
}

#[test]
fn execution1_matches_published_log() {
    let t0 = Instant::now();
    let (sim, report) = run("execution1");
    let elapsed = t0.elapsed();
    check_execution1(&sim.log).unwrap();
    assert_eq!(report.achieved, 1);
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
}

#[test]
fn every_shipped_scenario_is_deterministic() {
    for name in SCENARIOS {
        let (a, _) = run(name);
        let (b, _) = run(name);
        assert_eq!(sha256_hex(a.log_text().as_bytes()), sha256_hex(b.log_text().as_bytes()), "{name} log");
        assert_eq!(sha256_hex(a.trace_csv().as_bytes()), sha256_hex(b.trace_csv().as_bytes()), "{name} trace");
    }
}

#[test]
fn shipped_scenarios_stay_within_capacity() {
    for name in SCENARIOS {
        let (sim, _) = run(name);
        assert!(!sim.trace().records.is_empty(), "{name} has no trace");
        assert_eq!(capacity_violations(&sim), Vec::<Tick>::new(), "{name}");
    }
}

#[test]
fn postcondition_fails_when_the_displaced_move_completes() {
    let mut sim = Simulation::new(load("reactivity")).unwrap();
    let event_at = sim.scenario.events[0].at;
    step_through(&mut sim, event_at);
    let ends = sim.world.in_flight["C1"].completes_at;
    assert!(ends > event_at);
    sim.run_to_end();

    let failed: Vec<Tick> =
        sim.agent.history.iter().filter(|n| n.kind == NotificationKind::PostconditionFailed).map(|n| n.tick).collect();
    assert_eq!(failed, vec![ends]);
    // nothing deliberates on the event before the action ends
    assert!(!sim.log.iter().any(|e| e.name == events::REASONING_CYCLE && event_at <= e.tick && e.tick < ends));
    // the cycle at that tick installs a new intention
    let si = sim.log.iter().find(|e| e.name == events::SELECT_INTENTIONS && e.tick == ends).unwrap();
    assert!(si.detail.starts_with("new plan P2 generated, I2 activated"), "{}", si.detail);
    let rt = sim.log.iter().find(|e| e.name == events::RT_PROGRESS && e.tick == ends).unwrap();
    assert!(rt.detail.starts_with("I2(P2"), "{}", rt.detail);
    assert_eq!(sim.report().achieved, 1);
}

#[test]
fn replacement_plan_is_valid_from_the_sensed_state() {
    let mut sim = Simulation::new(load("reactivity")).unwrap();
    step_through(&mut sim, 30);
    let b = sim.agent.beliefs.clone();
    let p2 = sim.agent.library.get("P2").unwrap().to_time_triggered(sim.model()).unwrap();
    let p = problem(&sim, b, &["C1"]);
    let ms = validate_plan(&p, &p2).unwrap();
    assert_eq!(ms, p2.makespan());
}

fn suffix(tt: &TimeTriggeredPlan, from: Tick) -> TimeTriggeredPlan {
    TimeTriggeredPlan::new(
        tt.entries.iter().filter(|e| e.start >= from).map(|e| TtEntry { start: e.start - from, ..e.clone() }).collect(),
    )
}

#[test]
fn coordinator_split_beats_the_single_robot_plan() {
    let t0 = Instant::now();
    let mut sim = Simulation::new(load("coordinator")).unwrap();
    step_through(&mut sim, 20);
    let b = sim.agent.beliefs.clone();
    let p1 = sim.agent.library.get("P1").unwrap().to_time_triggered(sim.model()).unwrap();
    let p2 = sim.agent.library.get("P2").unwrap().to_time_triggered(sim.model()).unwrap();
    let before = validate_plan(&problem(&sim, b.clone(), &["C1"]), &suffix(&p1, 20)).unwrap();
    let after = validate_plan(&problem(&sim, b, &["C1", "C2"]), &p2).unwrap();
    assert!(after < before, "split {after} vs single {before}");

    let mut gathers: Vec<(String, String)> = p2
        .entries
        .iter()
        .filter_map(|e| match GridAction::parse_id(&e.action)? {
            GridAction::Gather { robot, resource } => Some((robot, resource)),
            _ => None,
        })
        .collect();
    gathers.sort();
    gathers.dedup();
    assert_eq!(gathers, vec![("C1".into(), "R1".into()), ("C2".into(), "R2".into())]);

    let report = sim.run_to_end();
    assert!(sim.log.iter().any(|e| e.detail.contains("dispatching C1 to R1, C2 to R2")));
    assert_eq!(report.achieved, 1);
    assert!(t0.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn learned_plan_is_reused_in_the_next_run() {
    let (first, r1) = run("learning");
    assert_eq!(r1.achieved, 1);
    assert!(r1.planner_calls >= 1);
    assert!(r1.library_size_end > r1.library_size_start);
    assert!(first.log.iter().any(|e| e.name == events::PLANNER_INVOKED));

    let learned = first.agent.library.clone();
    let mut second = Simulation::with_options(load("learning"), None, Some(&learned)).unwrap();
    let r2 = second.run_to_end();
    assert_eq!(r2.achieved, 1);
    assert_eq!(r2.planner_calls, 0);
    assert!(!second.log.iter().any(|e| e.name == events::PLANNER_INVOKED));
    assert_eq!(r2.library_size_start, r2.library_size_end);
    assert_eq!(r2.library_size_start, r1.library_size_end);
}

#[test]
fn library_never_shrinks_during_a_run() {
    for name in SCENARIOS {
        let mut sim = Simulation::new(load(name)).unwrap();
        let mut size = sim.agent.library.len();
        while !sim.is_finished() {
            sim.step();
            assert!(sim.agent.library.len() >= size, "{name} at {}", sim.tick);
            size = sim.agent.library.len();
        }
    }
}

#[test]
fn running_intentions_serve_pursued_goals() {
    for name in SCENARIOS {
        let mut sim = Simulation::new(load(name)).unwrap();
        while !sim.is_finished() {
            sim.step();
            for i in sim.agent.intentions.iter().filter(|i| i.status == IntentionStatus::Running) {
                let g = sim.agent.goals.iter().find(|g| g.id == i.goal).unwrap();
                assert_eq!(g.status, GoalStatus::Pursued, "{name}: {} at {}", i.id, sim.tick);
            }
        }
    }
}

#[test]
fn selections_respect_goal_deadlines() {
    for name in SCENARIOS {
        let (sim, _) = run(name);
        for e in sim.log.iter().filter(|e| e.name == events::SELECT_INTENTIONS) {
            let Some(rest) = e.detail.strip_prefix("available plan ").or_else(|| e.detail.strip_prefix("new plan "))
            else {
                continue;
            };
            let id = rest.split([' ', ',']).next().unwrap();
            let plan = sim.agent.library.get(id).unwrap();
            let goal = sim.agent.goals.iter().rfind(|g| g.key() == plan.goal_id && g.activated_at <= e.tick).unwrap();
            assert!(e.tick + plan.makespan <= goal.absolute_deadline, "{name}: {e}");
        }
    }
}

#[test]
fn fig2_plan_is_rejected_at_the_overlap_tick() {
    let (sim, report) = run("fig2_capacity");
    let model = sim.model();
    let plan = sim.agent.library.get("P1").unwrap();
    let tt = plan.to_time_triggered(model).unwrap();
    let initial = rtbdi::grid::GridWorld::new(&sim.scenario.world).read_sensing_data(model);
    let p = problem(&sim, initial, &["C1", "C2"]);
    assert_eq!(validate_plan(&p, &tt).unwrap(), 600);

    let cap = sim.agent.exec.intention_capacity();
    let (tick, actions) = first_overlap(&tt, model, cap).unwrap();
    let refused: Vec<_> = report.unschedulable().collect();
    assert_eq!(refused.len(), 1);
    assert_eq!(refused[0].violating_tick, Some(tick));
    let named: Vec<String> = refused[0]
        .tasks
        .iter()
        .map(|t| {
            let path: Vec<usize> = t.split('/').skip(1).map(|s| s.parse().unwrap()).collect();
            match plan.root.at(&path).unwrap() {
                PlanNode::Atomic(a) => a.action.clone(),
                other => panic!("{other:?}"),
            }
        })
        .collect();
    for a in &named {
        assert!(actions.contains(a), "{a} not active at {tick}");
    }
    assert_eq!(report.dropped, 1);
}

#[test]
fn fig2_plan_runs_to_completion_with_more_capacity() {
    let mut sc = load("fig2_capacity");
    sc.agent.capacity = r(2, 1);
    let (sim, report) = run_scenario(sc);
    assert_eq!(report.unschedulable().count(), 0);
    assert_eq!(report.achieved, 1);
    let (refused, _) = run("fig2_capacity");
    assert_eq!(sim.agent.library.get("P1").unwrap().root, refused.agent.library.get("P1").unwrap().root);
    let done = sim.agent.history.iter().find(|n| n.kind == NotificationKind::PlanCompleted).unwrap();
    assert!(done.tick <= 600, "completed at {}", done.tick);
    assert_eq!(capacity_violations(&sim), Vec::<Tick>::new());
}
