//! Plans a small grid problem with the built-in planner, validates the
//! result and prints the PDDL an external planner would receive.

use rtbdi::grid::{build_model, DomainConfig, GridWorld, WorldConfig};
use rtbdi::model::Formula;
use rtbdi::planner::{to_pddl, validate_plan, BuiltinPlanner, PlanningProblem};
use rtbdi::rational::Rational;

fn main() {
    let world: WorldConfig = serde_json::from_str(
        r#"{"width":4,"height":3,
            "robots":[{"id":"C1","at":[0,0]},{"id":"C2","at":[3,2]}],
            "resources":[{"id":"R1","at":[3,0],"count":1},{"id":"R2","at":[0,2],"count":1}],
            "warehouse":[1,1],"obstacles":[[2,1]]}"#,
    )
    .unwrap();
    let domain = DomainConfig::default();
    let resources: Vec<_> = world.resources.iter().map(|r| (r.id.clone(), r.at)).collect();
    let model = build_model(&world, &domain, &world.robot_ids(), &resources, 2, Rational::from_integer(1)).unwrap();
    let initial = GridWorld::new(&world).read_sensing_data(&model);
    let goal = Formula::parse("(>= stored 2)").unwrap();
    let problem = PlanningProblem::new(&model, initial, goal, 500);

    let plan = BuiltinPlanner::default().plan(&problem).unwrap().expect("solvable");
    println!("{plan}");
    println!("validated makespan {}", validate_plan(&problem, &plan).unwrap());

    let (domain_pddl, problem_pddl) = to_pddl(&problem).unwrap();
    println!("\n{problem_pddl}");
    println!("domain: {} lines", domain_pddl.lines().count());
}
