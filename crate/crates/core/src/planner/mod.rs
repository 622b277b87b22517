//! Deliberation: the builtin grid planner, PDDL 2.1 export, plan-text
//! parsing, the external planner adapter and an independent validator.

mod builtin;
mod external;
mod pddl;
mod validate;

use thiserror::Error;

use crate::model::{BeliefSet, Cell, Formula, Model, Tick, Value};
use crate::plan::TimeTriggeredPlan;

pub use builtin::{BuiltinPlanner, SearchStats};
pub use external::ExternalPlanner;
pub use pddl::{parse_plan_text, to_pddl, PddlError};
pub use validate::{validate_plan, ValidationError};

/// Input to a planner call.
#[derive(Debug, Clone)]
pub struct PlanningProblem<'a> {
    pub model: &'a Model,
    pub initial: BeliefSet,
    pub goal: Formula,
    /// Remaining ticks available.
    pub deadline: Tick,
    /// Robots the plan may use.
    pub actors: Vec<String>,
}

impl<'a> PlanningProblem<'a> {
    /// Uses every robot present in `initial`.
    pub fn new(model: &'a Model, initial: BeliefSet, goal: Formula, deadline: Tick) -> Self {
        let actors = present_robots(&initial);
        PlanningProblem { model, initial, goal, deadline, actors }
    }
}

/// Robots whose `at(..)` symbol holds a real cell.
pub fn present_robots(b: &BeliefSet) -> Vec<String> {
    b.values
        .iter()
        .filter_map(|(k, v)| {
            let r = k.strip_prefix("at(")?.strip_suffix(')')?;
            matches!(v, Value::Loc(c) if *c != Cell::NOWHERE).then(|| r.to_string())
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("planner does not support this model: {0}")]
    Unsupported(String),
    #[error("planner i/o failure: {0}")]
    Io(String),
    #[error("planner output rejected: {0}")]
    BadOutput(String),
}

/// How plans are produced.
#[derive(Debug, Clone)]
pub enum PlannerAdapter {
    Builtin(BuiltinPlanner),
    External(ExternalPlanner),
}

impl Default for PlannerAdapter {
    fn default() -> Self {
        PlannerAdapter::Builtin(BuiltinPlanner::default())
    }
}

impl PlannerAdapter {
    /// `builtin` or `external:<command>`.
    pub fn parse(spec: &str) -> Result<PlannerAdapter, String> {
        if spec == "builtin" {
            return Ok(PlannerAdapter::default());
        }
        match spec.strip_prefix("external:") {
            Some(cmd) if !cmd.trim().is_empty() => Ok(PlannerAdapter::External(ExternalPlanner::new(cmd.trim()))),
            _ => Err(format!("unknown planner `{spec}`, expected builtin or external:<command>")),
        }
    }

    pub fn name(&self) -> String {
        match self {
            PlannerAdapter::Builtin(_) => "builtin".into(),
            PlannerAdapter::External(e) => format!("external:{}", e.command),
        }
    }

    /// Returns a plan that passed the validator, or `None` when no plan
    /// within the deadline was found.
    pub fn plan(&self, problem: &PlanningProblem) -> Result<Option<TimeTriggeredPlan>, PlannerError> {
        let tt = match self {
            PlannerAdapter::Builtin(b) => b.plan(problem)?,
            PlannerAdapter::External(e) => e.plan(problem)?,
        };
        let Some(tt) = tt else { return Ok(None) };
        match validate_plan(problem, &tt) {
            Ok(_) => Ok(Some(tt)),
            Err(ValidationError::DeadlineExceeded { .. }) => Ok(None),
            Err(e) => Err(PlannerError::BadOutput(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_model, DomainConfig, GridWorld, Timing, WorldConfig};
    use crate::model::{Formula, Model};
    use crate::rational::Rational;

    pub(crate) fn grid_instance(world: &str, domain: DomainConfig) -> (Model, GridWorld) {
        let cfg: WorldConfig = serde_json::from_str(world).unwrap();
        let res: Vec<(String, Cell)> = cfg.resources.iter().map(|r| (r.id.clone(), r.at)).collect();
        let total = cfg.resources.iter().map(|r| r.count).sum();
        let m = build_model(&cfg, &domain, &cfg.robot_ids(), &res, total, Rational::from_integer(1)).unwrap();
        (m, GridWorld::new(&cfg))
    }

    #[test]
    fn two_robot_split_from_tick_twenty() {
        let (m, w) = grid_instance(
            r#"{"robots":[{"id":"C1","at":[1,1],"battery":18},{"id":"C2","at":[4,0]}],
                "resources":[{"id":"R1","at":[1,4],"count":2},{"id":"R2","at":[4,2],"count":1}],
                "warehouse":[3,2]}"#,
            DomainConfig::default(),
        );
        let goal = Formula::parse("(and (= (remaining R1) 0) (= (remaining R2) 0) (>= stored 3))").unwrap();
        let p = PlanningProblem::new(&m, w.read_sensing_data(&m), goal, 400);
        let t0 = std::time::Instant::now();
        let (tt, stats) = BuiltinPlanner::default().plan_with_stats(&p).unwrap();
        let tt = tt.unwrap();
        eprintln!("{tt}{stats:?} {:?}", t0.elapsed());
        assert_eq!(validate_plan(&p, &tt).unwrap(), 130);
    }

    #[test]
    fn fig2_instance_has_makespan_600() {
        let d = DomainConfig {
            move_: Timing::new(100, Rational::new(1, 5)),
            gather: Timing::new(100, Rational::new(3, 5)),
            deposit: Timing::new(100, Rational::new(3, 5)),
            ..DomainConfig::default()
        };
        let (m, w) = grid_instance(
            r#"{"robots":[{"id":"C1","at":[0,0]},{"id":"C2","at":[2,0]}],
                "resources":[{"id":"R1","at":[0,3],"count":1},{"id":"R2","at":[2,3],"count":1}],
                "warehouse":[1,3]}"#,
            d,
        );
        let goal = Formula::parse("(>= stored 2)").unwrap();
        let p = PlanningProblem::new(&m, w.read_sensing_data(&m), goal, 650);
        let (tt, stats) = BuiltinPlanner::default().plan_with_stats(&p).unwrap();
        let tt = tt.unwrap();
        eprintln!("{tt}{stats:?}");
        assert_eq!(validate_plan(&p, &tt).unwrap(), 600);
    }
}
