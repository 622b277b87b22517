use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{evaluate, BeliefSet, Formula, Model, ModelError, Tick};
use crate::plan::NodePath;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Desire {
    pub id: String,
    #[serde(default)]
    pub pre: Formula,
    pub goal: Formula,
    /// Relative deadline, counted from activation.
    pub deadline: Tick,
    /// Larger is more important.
    #[serde(default)]
    pub priority: i64,
    #[serde(default)]
    pub description: String,
}

impl Desire {
    pub fn validate(&self, model: &Model) -> Result<(), ModelError> {
        if self.deadline < 1 {
            return Err(ModelError::Invalid(format!("desire `{}` has deadline 0", self.id)));
        }
        self.pre.check(model)?;
        self.goal.check(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalStatus {
    Pending,
    Pursued,
    Achieved,
    Dropped,
    Expired,
}

impl GoalStatus {
    pub fn is_open(self) -> bool {
        matches!(self, GoalStatus::Pending | GoalStatus::Pursued)
    }
}

/// Where a sub-goal came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentLink {
    pub intention: String,
    pub path: NodePath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveGoal {
    pub id: String,
    pub goal: Formula,
    #[serde(default)]
    pub description: String,
    pub priority: i64,
    pub activated_at: Tick,
    pub absolute_deadline: Tick,
    pub status: GoalStatus,
    #[serde(default)]
    pub parent: Option<ParentLink>,
    /// Plans the real-time layer refused for this goal.
    #[serde(default)]
    pub rejected: BTreeSet<String>,
}

impl ActiveGoal {
    pub fn activate(d: &Desire, t: Tick) -> Self {
        ActiveGoal {
            id: d.id.clone(),
            goal: d.goal.clone(),
            description: d.description.clone(),
            priority: d.priority,
            activated_at: t,
            absolute_deadline: t + d.deadline,
            status: GoalStatus::Pending,
            parent: None,
            rejected: BTreeSet::new(),
        }
    }

    /// Library key of the goal formula.
    pub fn key(&self) -> String {
        self.goal.canonical()
    }
}

/// Admission order: higher priority first, then lower id.
pub fn priority_order(goals: &[ActiveGoal]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..goals.len()).collect();
    idx.sort_by(|&a, &b| goals[b].priority.cmp(&goals[a].priority).then_with(|| goals[a].id.cmp(&goals[b].id)));
    idx
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoalUpdate {
    /// Newly activated goal ids, in admission order.
    pub activated: Vec<String>,
    pub achieved: Vec<String>,
    pub expired: Vec<String>,
}

/// Activates every desire whose precondition holds (higher priority
/// first, ties by id), removing it from `desires`; then marks goals
/// achieved when their formula holds and expired once past deadline.
pub fn update_active_goals(
    goals: &mut Vec<ActiveGoal>,
    b: &BeliefSet,
    desires: &mut Vec<Desire>,
    t: Tick,
) -> GoalUpdate {
    let mut out = GoalUpdate::default();
    let mut eligible: Vec<usize> = (0..desires.len())
        .filter(|&i| evaluate(&desires[i].pre, b).unwrap_or(false) && !goals.iter().any(|g| g.id == desires[i].id))
        .collect();
    eligible.sort_by(|&a, &b| {
        desires[b].priority.cmp(&desires[a].priority).then_with(|| desires[a].id.cmp(&desires[b].id))
    });
    for &i in &eligible {
        goals.push(ActiveGoal::activate(&desires[i], t));
        out.activated.push(desires[i].id.clone());
    }
    let taken: BTreeSet<usize> = eligible.into_iter().collect();
    let mut i = 0;
    desires.retain(|_| {
        i += 1;
        !taken.contains(&(i - 1))
    });
    for g in goals.iter_mut().filter(|g| g.status.is_open()) {
        if evaluate(&g.goal, b).unwrap_or(false) {
            g.status = GoalStatus::Achieved;
            out.achieved.push(g.id.clone());
        } else if t > g.absolute_deadline {
            g.status = GoalStatus::Expired;
            out.expired.push(g.id.clone());
        }
    }
    out
}
