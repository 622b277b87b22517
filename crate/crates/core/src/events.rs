//! Run-log events, rendered as `[tick] Name: detail`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::Tick;

pub const REASONING_CYCLE: &str = "ReasoningCycle";
pub const UPDATE_ACTIVE_GOALS: &str = "UpdateActiveGoals";
pub const SELECT_INTENTIONS: &str = "SelectIntentions";
pub const RT_PROGRESS: &str = "RT-ProgressAndMonitorIntentions";
pub const READ_SENSING_DATA: &str = "ReadSensingData";
pub const PLAYER_INTERACTION: &str = "Player's interaction";
pub const PLANNER_INVOKED: &str = "PlannerInvoked";
pub const PLANNER_FAILURE: &str = "PlannerFailure";
pub const PLANNER_ERROR: &str = "PlannerError";
pub const INTENTION_ABORTED: &str = "IntentionAborted";
pub const GOAL_DROPPED: &str = "GoalDropped";
pub const GOAL_EXPIRED: &str = "GoalExpired";
pub const EVENT_REJECTED: &str = "EventRejected";

/// Phase names of a reasoning cycle of a reasoning cycle, in order of appearance.
pub const CYCLE_PHASES: [&str; 4] = [REASONING_CYCLE, UPDATE_ACTIVE_GOALS, SELECT_INTENTIONS, RT_PROGRESS];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEvent {
    pub tick: Tick,
    pub name: String,
    pub detail: String,
}

impl LogEvent {
    pub fn new(tick: Tick, name: impl Into<String>, detail: impl Into<String>) -> Self {
        LogEvent { tick, name: name.into(), detail: detail.into() }
    }

    /// Parses a rendered line back; the name ends at the first `": "`.
    pub fn parse(line: &str) -> Option<LogEvent> {
        let rest = line.strip_prefix('[')?;
        let (tick, rest) = rest.split_once("] ")?;
        let (name, detail) = rest.split_once(": ").unwrap_or((rest.trim_end_matches(':'), ""));
        Some(LogEvent::new(tick.parse().ok()?, name, detail))
    }
}

impl fmt::Display for LogEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.tick, self.name, self.detail)
    }
}
