use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ActiveGoal;
use crate::model::{evaluate, BeliefSet, Model, ModelError, Tick};
use crate::plan::Plan;

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("plan `{id}` keyed as `{key}` but achieves `{goal}`")]
    KeyMismatch { id: String, key: String, goal: String },
    #[error("duplicate plan id `{0}`")]
    DuplicateId(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("library document: {0}")]
    Json(#[from] serde_json::Error),
}

/// Plans indexed by the canonical text of the goal they achieve. The
/// library only grows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoalPlanLibrary {
    plans: BTreeMap<String, Vec<Plan>>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    plans: Vec<Plan>,
}

impl GoalPlanLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a library, recomputing derived plan fields. Each plan's
    /// `goal_id` is re-canonicalized.
    pub fn from_plans(plans: Vec<Plan>, model: &Model) -> Result<Self, LibraryError> {
        let mut lib = Self::new();
        for mut p in plans {
            p.refresh(model)?;
            let goal = crate::model::Formula::parse(&p.goal_id)?;
            p.goal_id = goal.canonical();
            lib.insert(p)?;
        }
        Ok(lib)
    }

    pub fn len(&self) -> usize {
        self.plans.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plans(&self) -> impl Iterator<Item = &Plan> {
        self.plans.values().flatten()
    }

    pub fn plans_for(&self, key: &str) -> &[Plan] {
        self.plans.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn get(&self, id: &str) -> Option<&Plan> {
        self.plans().find(|p| p.id == id)
    }

    /// First unused id of the form `P<n>`, starting at size + 1.
    pub fn next_id(&self) -> String {
        let ids: BTreeSet<&str> = self.plans().map(|p| p.id.as_str()).collect();
        (self.len() + 1..).map(|n| format!("P{n}")).find(|id| !ids.contains(id.as_str())).unwrap()
    }

    /// Stores a plan under its goal. A plan identical to a stored one
    /// (same body, precondition and context) is not duplicated; the id of
    /// the stored plan is returned instead.
    pub fn insert(&mut self, plan: Plan) -> Result<String, LibraryError> {
        if let Some(same) = self
            .plans_for(&plan.goal_id)
            .iter()
            .find(|p| p.root == plan.root && p.pre == plan.pre && p.context == plan.context)
        {
            return Ok(same.id.clone());
        }
        if self.get(&plan.id).is_some() {
            return Err(LibraryError::DuplicateId(plan.id));
        }
        let id = plan.id.clone();
        self.plans.entry(plan.goal_id.clone()).or_default().push(plan);
        Ok(id)
    }

    pub fn to_json(&self) -> String {
        let doc = Document { plans: self.plans().cloned().collect() };
        serde_json::to_string_pretty(&doc).expect("plans serialize")
    }

    pub fn from_json(text: &str, model: &Model) -> Result<Self, LibraryError> {
        let doc: Document = serde_json::from_str(text)?;
        Self::from_plans(doc.plans, model)
    }

    /// Reads the plans of a library document without resolving them
    /// against a model.
    pub fn plans_from_json(text: &str) -> Result<Vec<Plan>, LibraryError> {
        Ok(serde_json::from_str::<Document>(text)?.plans)
    }

    /// Adds every plan of `other` not already present.
    pub fn merge(&mut self, other: &GoalPlanLibrary) -> Result<(), LibraryError> {
        for p in other.plans() {
            if self.get(&p.id).is_none() {
                self.insert(p.clone())?;
            }
        }
        Ok(())
    }
}

/// Sort key giving `P2 < P10`.
fn id_key(id: &str) -> (u64, &str) {
    let digits: String = id.chars().skip_while(|c| !c.is_ascii_digit()).collect();
    (digits.parse().unwrap_or(u64::MAX), id)
}

/// Best applicable plan for `g`: its precondition and context hold in
/// `b` and it can finish by the goal's deadline. Ordered by makespan,
/// then total cost, then id. Plans in `exclude` are skipped.
pub fn lookup_plan<'a>(
    g: &ActiveGoal,
    library: &'a GoalPlanLibrary,
    b: &BeliefSet,
    now: Tick,
    exclude: &BTreeSet<String>,
) -> Option<&'a Plan> {
    library
        .plans_for(&g.key())
        .iter()
        .filter(|p| !exclude.contains(&p.id))
        .filter(|p| now + p.makespan <= g.absolute_deadline)
        .filter(|p| evaluate(&p.pre, b).unwrap_or(false) && evaluate(&p.context, b).unwrap_or(false))
        .min_by(|a, b| {
            a.makespan
                .cmp(&b.makespan)
                .then_with(|| a.total_cost.cmp(&b.total_cost))
                .then_with(|| id_key(&a.id).cmp(&id_key(&b.id)))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdi::{Desire, GoalStatus};
    use crate::model::Formula;
    use crate::plan::testing::toy_model;
    use crate::plan::PlanNode;

    fn goal(deadline: Tick) -> ActiveGoal {
        let d = Desire {
            id: "G1".into(),
            pre: Formula::True,
            goal: Formula::parse("(and (>= stored 1) (= flag true))").unwrap(),
            deadline,
            priority: 0,
            description: String::new(),
        };
        let mut g = ActiveGoal::activate(&d, 0);
        g.status = GoalStatus::Pending;
        g
    }

    fn plan(id: &str, actions: &[&str], model: &Model) -> Plan {
        let goal = Formula::parse("(and (= flag true) (>= stored 1))").unwrap();
        let root = PlanNode::Sequential(actions.iter().map(|a| PlanNode::atomic(format!("{a}(C1)"), "C1")).collect());
        Plan::new(id, &goal, root, Formula::True, Formula::True, model).unwrap()
    }

    #[test]
    fn empty_library_finds_nothing() {
        let lib = GoalPlanLibrary::new();
        assert!(lookup_plan(&goal(100), &lib, &BeliefSet::new(0), 0, &BTreeSet::new()).is_none());
        assert_eq!(lib.next_id(), "P1");
    }

    #[test]
    fn makespan_dominates_cost() {
        let mut m = toy_model(&[("a", "C1", 20), ("b", "C1", 20), ("c", "C1", 20)]);
        m.actions[0].cost = crate::rational::Rational::new(9, 10);
        m.reindex().unwrap();
        let mut lib = GoalPlanLibrary::new();
        lib.insert(plan("P1", &["b", "b", "c"], &m)).unwrap();
        lib.insert(plan("P2", &["a", "a"], &m)).unwrap();
        let g = goal(100);
        let best = lookup_plan(&g, &lib, &BeliefSet::new(0), 0, &BTreeSet::new()).unwrap();
        assert_eq!(best.id, "P2");
        // deadline cuts the longer plan only
        let best = lookup_plan(&goal(40), &lib, &BeliefSet::new(0), 0, &BTreeSet::new()).unwrap();
        assert_eq!(best.id, "P2");
        assert!(lookup_plan(&goal(39), &lib, &BeliefSet::new(0), 0, &BTreeSet::new()).is_none());
        let ex: BTreeSet<String> = ["P2".to_string()].into();
        assert_eq!(lookup_plan(&g, &lib, &BeliefSet::new(0), 0, &ex).unwrap().id, "P1");
    }

    #[test]
    fn insert_is_idempotent_and_round_trips() {
        let m = toy_model(&[("a", "C1", 20)]);
        let mut lib = GoalPlanLibrary::new();
        assert_eq!(lib.insert(plan("P1", &["a"], &m)).unwrap(), "P1");
        assert_eq!(lib.insert(plan("P2", &["a"], &m)).unwrap(), "P1");
        assert_eq!(lib.len(), 1);
        let back = GoalPlanLibrary::from_json(&lib.to_json(), &m).unwrap();
        assert_eq!(back, lib);
        assert_eq!(lib.next_id(), "P2");
    }
}
