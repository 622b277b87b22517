//! Plan trees (atomic, sequential, parallel), conversion from
//! time-triggered planner output, and makespan computation.

mod frontier;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Formula, Model, ModelError, Tick};
use crate::rational::{self, Rational};

pub use frontier::{advance_frontier, Frontier, FrontierError, NodeState, Ready};

/// Position of a node in a plan tree: child indices from the root.
pub type NodePath = Vec<usize>;

pub fn path_text(p: &[usize]) -> String {
    if p.is_empty() {
        return "/".into();
    }
    p.iter().map(|i| format!("/{i}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicPlan {
    /// Grounded action id, see [`crate::model::ActionSpec::id`].
    pub action: String,
    /// Offset from the activation of the enclosing node.
    #[serde(default)]
    pub start: Tick,
    pub actor: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubGoalSpec {
    pub goal: Formula,
    /// Relative deadline declared for the sub-goal; also its worst-case span.
    pub deadline: Tick,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    #[serde(default)]
    pub delay: Tick,
    pub node: PlanNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanNode {
    Atomic(AtomicPlan),
    Sequential(Vec<PlanNode>),
    Parallel(Vec<Branch>),
    SubGoal(SubGoalSpec),
}

impl PlanNode {
    pub fn atomic(action: impl Into<String>, actor: impl Into<String>) -> PlanNode {
        PlanNode::Atomic(AtomicPlan { action: action.into(), start: 0, actor: actor.into() })
    }

    pub fn child(&self, i: usize) -> Option<&PlanNode> {
        match self {
            PlanNode::Sequential(c) => c.get(i),
            PlanNode::Parallel(b) => b.get(i).map(|b| &b.node),
            _ => None,
        }
    }

    pub fn at(&self, path: &[usize]) -> Option<&PlanNode> {
        path.iter().try_fold(self, |n, &i| n.child(i))
    }

    pub fn children_len(&self) -> usize {
        match self {
            PlanNode::Sequential(c) => c.len(),
            PlanNode::Parallel(b) => b.len(),
            _ => 0,
        }
    }

    /// Visits every node in pre-order with its path.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&NodePath, &'a PlanNode)) {
        fn go<'a>(n: &'a PlanNode, path: &mut NodePath, f: &mut impl FnMut(&NodePath, &'a PlanNode)) {
            f(path, n);
            for i in 0..n.children_len() {
                path.push(i);
                go(n.child(i).unwrap(), path, f);
                path.pop();
            }
        }
        go(self, &mut Vec::new(), f)
    }

    pub fn atomics(&self) -> Vec<(NodePath, &AtomicPlan)> {
        let mut out = Vec::new();
        self.walk(&mut |p, n| {
            if let PlanNode::Atomic(a) = n {
                out.push((p.clone(), a));
            }
        });
        out
    }

    /// Composite nodes must be nonempty; atomics must reference known actions.
    pub fn check(&self, model: &Model) -> Result<(), ModelError> {
        let mut res = Ok(());
        self.walk(&mut |p, n| {
            if res.is_err() {
                return;
            }
            res = match n {
                PlanNode::Atomic(a) => model.require_action(&a.action).map(|_| ()),
                PlanNode::SubGoal(s) => s.goal.check(model),
                _ if n.children_len() == 0 => {
                    Err(ModelError::Invalid(format!("empty composite node at {}", path_text(p))))
                }
                _ => Ok(()),
            };
        });
        res
    }
}

/// Atomic start + duration; sequential sum; parallel max of delay + child.
/// Sub-goal leaves count for their declared deadline.
pub fn makespan(node: &PlanNode, model: &Model) -> Result<Tick, ModelError> {
    Ok(match node {
        PlanNode::Atomic(a) => a.start + model.require_action(&a.action)?.duration,
        PlanNode::SubGoal(s) => s.deadline,
        PlanNode::Sequential(c) => c.iter().map(|n| makespan(n, model)).sum::<Result<Tick, _>>()?,
        PlanNode::Parallel(b) => b
            .iter()
            .map(|b| makespan(&b.node, model).map(|m| b.delay + m))
            .try_fold(0, |acc, m| m.map(|m| acc.max(m)))?,
    })
}

/// Σ cost × duration over atomic leaves, in utilization-ticks.
pub fn total_cost(node: &PlanNode, model: &Model) -> Result<Rational, ModelError> {
    node.atomics().into_iter().try_fold(Rational::from_integer(0), |acc, (_, a)| {
        let spec = model.require_action(&a.action)?;
        Ok(acc + spec.cost * Rational::from_integer(spec.duration as i64))
    })
}

/// One atomic leaf placed at its earliest start relative to plan start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledAtomic {
    pub path: NodePath,
    pub start: Tick,
    pub duration: Tick,
    pub atomic: AtomicPlan,
}

/// Earliest-start schedule of every atomic leaf, assuming each action
/// takes exactly its declared duration.
pub fn nominal_schedule(node: &PlanNode, model: &Model) -> Result<Vec<ScheduledAtomic>, ModelError> {
    fn go(
        n: &PlanNode,
        at: Tick,
        path: &mut NodePath,
        model: &Model,
        out: &mut Vec<ScheduledAtomic>,
    ) -> Result<Tick, ModelError> {
        Ok(match n {
            PlanNode::Atomic(a) => {
                let d = model.require_action(&a.action)?.duration;
                out.push(ScheduledAtomic { path: path.clone(), start: at + a.start, duration: d, atomic: a.clone() });
                at + a.start + d
            }
            PlanNode::SubGoal(s) => at + s.deadline,
            PlanNode::Sequential(c) => {
                let mut t = at;
                for (i, child) in c.iter().enumerate() {
                    path.push(i);
                    t = go(child, t, path, model, out)?;
                    path.pop();
                }
                t
            }
            PlanNode::Parallel(b) => {
                let mut end = at;
                for (i, br) in b.iter().enumerate() {
                    path.push(i);
                    end = end.max(go(&br.node, at + br.delay, path, model, out)?);
                    path.pop();
                }
                end
            }
        })
    }
    let mut out = Vec::new();
    go(node, 0, &mut Vec::new(), model, &mut out)?;
    out.sort_by(|a, b| (a.start, &a.atomic.actor, &a.path).cmp(&(b.start, &b.atomic.actor, &b.path)));
    Ok(out)
}

/// An intention's plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub id: String,
    /// Canonical text of the goal formula this plan achieves.
    pub goal_id: String,
    pub root: PlanNode,
    #[serde(default)]
    pub pre: Formula,
    /// Whole-plan context condition.
    #[serde(default)]
    pub context: Formula,
    #[serde(default)]
    pub makespan: Tick,
    #[serde(default = "zero", with = "rational::serde_text")]
    pub total_cost: Rational,
}

fn zero() -> Rational {
    Rational::from_integer(0)
}

impl Plan {
    pub fn new(
        id: impl Into<String>,
        goal: &Formula,
        root: PlanNode,
        pre: Formula,
        context: Formula,
        model: &Model,
    ) -> Result<Plan, ModelError> {
        let mut p =
            Plan { id: id.into(), goal_id: goal.canonical(), root, pre, context, makespan: 0, total_cost: zero() };
        p.refresh(model)?;
        Ok(p)
    }

    /// Recomputes the derived fields and validates against the model.
    pub fn refresh(&mut self, model: &Model) -> Result<(), ModelError> {
        self.root.check(model)?;
        self.pre.check(model)?;
        self.context.check(model)?;
        self.makespan = makespan(&self.root, model)?;
        self.total_cost = total_cost(&self.root, model)?;
        Ok(())
    }

    pub fn schedule(&self, model: &Model) -> Result<Vec<ScheduledAtomic>, ModelError> {
        nominal_schedule(&self.root, model)
    }

    /// Flattens the plan into time-triggered entries.
    pub fn to_time_triggered(&self, model: &Model) -> Result<TimeTriggeredPlan, ModelError> {
        Ok(TimeTriggeredPlan::new(
            self.schedule(model)?
                .into_iter()
                .map(|s| TtEntry {
                    start: s.start,
                    action: s.atomic.action,
                    duration: s.duration,
                    actor: s.atomic.actor,
                })
                .collect(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TtEntry {
    pub start: Tick,
    pub action: String,
    pub duration: Tick,
    pub actor: String,
}

/// Planner output: each action with an absolute start and a duration.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeTriggeredPlan {
    pub entries: Vec<TtEntry>,
}

impl TimeTriggeredPlan {
    /// Builds a plan with entries sorted by (start, actor, action).
    pub fn new(mut entries: Vec<TtEntry>) -> Self {
        entries.sort_by(|a, b| (a.start, &a.actor, &a.action).cmp(&(b.start, &b.actor, &b.action)));
        TimeTriggeredPlan { entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn makespan(&self) -> Tick {
        self.entries.iter().map(|e| e.start + e.duration).max().unwrap_or(0)
    }

    /// Entries of a single actor, in start order.
    pub fn for_actor(&self, actor: &str) -> TimeTriggeredPlan {
        TimeTriggeredPlan { entries: self.entries.iter().filter(|e| e.actor == actor).cloned().collect() }
    }

    pub fn actors(&self) -> Vec<String> {
        let mut a: Vec<String> = self.entries.iter().map(|e| e.actor.clone()).collect();
        a.sort();
        a.dedup();
        a
    }

    /// Checks durations against the model.
    pub fn check(&self, model: &Model) -> Result<(), ModelError> {
        for e in &self.entries {
            let spec = model.require_action(&e.action)?;
            if spec.duration != e.duration {
                return Err(ModelError::Invalid(format!(
                    "duration of `{}` is {} in the plan but {} in the model",
                    e.action, e.duration, spec.duration
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for TimeTriggeredPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{}: {} {} [{}]", e.start, e.actor, e.action, e.duration)?;
        }
        Ok(())
    }
}

/// Converts planner output into a parallel plan with one branch per
/// entry, each delayed by its start time. The plan precondition is the
/// conjunction of the preconditions of the actions starting at tick 0.
pub fn from_time_triggered(
    tt: &TimeTriggeredPlan,
    id: impl Into<String>,
    goal: &Formula,
    model: &Model,
) -> Result<Plan, ModelError> {
    tt.check(model)?;
    let mut branches = Vec::with_capacity(tt.entries.len());
    let mut pre = Vec::new();
    for e in &tt.entries {
        let spec = model.require_action(&e.action)?;
        if e.start == 0 {
            pre.push(spec.pre.clone());
        }
        branches.push(Branch { delay: e.start, node: PlanNode::atomic(e.action.clone(), e.actor.clone()) });
    }
    let root = if branches.is_empty() { PlanNode::Sequential(Vec::new()) } else { PlanNode::Parallel(branches) };
    let mut plan = Plan {
        id: id.into(),
        goal_id: goal.canonical(),
        root,
        pre: Formula::and(pre),
        context: Formula::True,
        makespan: 0,
        total_cost: zero(),
    };
    if tt.is_empty() {
        return Ok(plan);
    }
    plan.refresh(model)?;
    Ok(plan)
}
