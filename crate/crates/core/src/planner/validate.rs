//! Plan validation by simulation over the model, independent of any
//! planner's internal state representation.

use std::collections::BTreeSet;

use thiserror::Error;

use super::PlanningProblem;
use crate::model::{apply_effects, evaluate, ModelError, Tick};
use crate::plan::{TimeTriggeredPlan, TtEntry};

#[derive(Debug, Error, PartialEq)]
pub enum ValidationError {
    #[error("{0}")]
    Structure(String),
    #[error("precondition of {action} fails at tick {tick}")]
    Precondition { tick: Tick, action: String },
    #[error("{action} is no longer applicable when it completes at tick {tick}")]
    NotApplicableAtEnd { tick: Tick, action: String },
    #[error("postcondition of {action} fails at tick {tick}")]
    Postcondition { tick: Tick, action: String },
    #[error("context of {action} violated at tick {tick}")]
    Context { tick: Tick, action: String },
    #[error("goal does not hold at tick {tick}")]
    Goal { tick: Tick },
    #[error("makespan {makespan} exceeds deadline {deadline}")]
    DeadlineExceeded { makespan: Tick, deadline: Tick },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Simulates `plan` from the problem's initial state: effects apply at
/// the end of each action, preconditions are checked at start (and again
/// at completion, since the environment re-checks applicability), the
/// context over every tick of the action, and the goal at the makespan.
/// Returns the makespan.
pub fn validate_plan(problem: &PlanningProblem, plan: &TimeTriggeredPlan) -> Result<Tick, ValidationError> {
    let model = problem.model;
    plan.check(model)?;
    let actors: BTreeSet<&str> = problem.actors.iter().map(String::as_str).collect();
    for e in &plan.entries {
        let spec = model.require_action(&e.action)?;
        if spec.actor != e.actor {
            return Err(ValidationError::Structure(format!("{} is not an action of {}", e.action, e.actor)));
        }
        if !actors.contains(e.actor.as_str()) {
            return Err(ValidationError::Structure(format!("{} is not an available actor", e.actor)));
        }
    }
    for a in &actors {
        let mut mine: Vec<&TtEntry> = plan.entries.iter().filter(|e| e.actor == *a).collect();
        mine.sort_by_key(|e| e.start);
        for w in mine.windows(2) {
            if w[0].start + w[0].duration > w[1].start {
                return Err(ValidationError::Structure(format!(
                    "{a} runs {} and {} at the same time",
                    w[0].action, w[1].action
                )));
            }
        }
    }

    let makespan = plan.makespan();
    let mut times: BTreeSet<Tick> = BTreeSet::from([0]);
    for e in &plan.entries {
        times.insert(e.start);
        times.insert(e.start + e.duration);
    }
    let mut state = problem.initial.clone();
    let mut ends: Vec<&TtEntry> = plan.entries.iter().collect();
    ends.sort_by(|a, b| (a.start + a.duration, &a.actor).cmp(&(b.start + b.duration, &b.actor)));
    for &t in &times {
        for e in ends.iter().filter(|e| e.start + e.duration == t) {
            let spec = model.require_action(&e.action)?;
            if !evaluate(&spec.pre, &state)? {
                return Err(ValidationError::NotApplicableAtEnd { tick: t, action: e.action.clone() });
            }
            state = apply_effects(&spec.effects, &state)?;
            if !evaluate(&spec.post, &state)? {
                return Err(ValidationError::Postcondition { tick: t, action: e.action.clone() });
            }
        }
        for e in plan.entries.iter().filter(|e| e.start == t) {
            let spec = model.require_action(&e.action)?;
            if !evaluate(&spec.pre, &state)? {
                return Err(ValidationError::Precondition { tick: t, action: e.action.clone() });
            }
        }
        for e in plan.entries.iter().filter(|e| e.start <= t && t < e.start + e.duration) {
            let spec = model.require_action(&e.action)?;
            if !evaluate(&spec.context, &state)? {
                return Err(ValidationError::Context { tick: t, action: e.action.clone() });
            }
        }
    }
    if !evaluate(&problem.goal, &state)? {
        return Err(ValidationError::Goal { tick: makespan });
    }
    if makespan > problem.deadline {
        return Err(ValidationError::DeadlineExceeded { makespan, deadline: problem.deadline });
    }
    Ok(makespan)
}
