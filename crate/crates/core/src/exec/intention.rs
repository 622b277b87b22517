use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::Tick;
use crate::plan::{path_text, Frontier, NodePath, Plan};
use crate::rt::RtTask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentionStatus {
    /// Created but not admitted by the real-time layer.
    Scheduled,
    Running,
    Completed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunningAction {
    pub node: NodePath,
    pub action: String,
    pub actor: String,
    pub started_at: Tick,
    pub ends_at: Tick,
    /// Origin tag of the action's real-time tasks.
    pub origin: String,
}

/// An admitted (or pending) plan instance pursuing one goal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Intention {
    pub id: String,
    pub plan: Plan,
    pub goal: String,
    /// Set for per-robot intentions dispatched by a coordinator.
    #[serde(default)]
    pub robot: Option<String>,
    pub frontier: Frontier,
    pub started_at: Tick,
    pub status: IntentionStatus,
    pub running: BTreeMap<NodePath, RunningAction>,
    /// Reserved tasks per atomic node.
    pub reserved: BTreeMap<NodePath, Vec<RtTask>>,
    /// Reserved start tick per atomic node.
    pub nominal: BTreeMap<NodePath, Tick>,
    /// Atomics already reported as unschedulable.
    pub unschedulable: BTreeSet<NodePath>,
    /// Reasoning cycles in which this intention was progressed.
    pub steps: u32,
}

impl Intention {
    pub fn new(id: impl Into<String>, plan: Plan, goal: impl Into<String>, t: Tick) -> Self {
        let frontier = Frontier::new(&plan, t);
        Intention {
            id: id.into(),
            plan,
            goal: goal.into(),
            robot: None,
            frontier,
            started_at: t,
            status: IntentionStatus::Scheduled,
            running: BTreeMap::new(),
            reserved: BTreeMap::new(),
            nominal: BTreeMap::new(),
            unschedulable: BTreeSet::new(),
            steps: 0,
        }
    }

    pub fn is_live(&self) -> bool {
        matches!(self.status, IntentionStatus::Scheduled | IntentionStatus::Running)
    }

    /// Origin tag for the tasks of one node, e.g. `I2/0/3`.
    pub fn origin(&self, path: &[usize]) -> String {
        format!("{}{}", self.id, path_text(path))
    }

    /// `C1 move_up & C2 move_up`, in actor order.
    pub fn running_summary(&self) -> String {
        let mut acts: Vec<(&str, &str)> = self
            .running
            .values()
            .map(|r| (r.actor.as_str(), r.action.split('(').next().unwrap_or(&r.action)))
            .collect();
        acts.sort();
        acts.iter().map(|(a, n)| format!("{a} {n}")).collect::<Vec<_>>().join(" & ")
    }
}
