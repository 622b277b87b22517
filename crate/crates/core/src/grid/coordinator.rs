//! Splitting a fleet plan into per-robot assignments.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::GridAction;
use crate::plan::TimeTriggeredPlan;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotAssignment {
    pub robot: String,
    /// The robot's share of the fleet plan, with absolute start times kept.
    pub plan: TimeTriggeredPlan,
    /// Resources this robot gathers from.
    pub resources: Vec<String>,
}

/// Splits a time-triggered plan over all robots by actor.
pub fn coordinator_dispatch(plan: &TimeTriggeredPlan) -> Vec<RobotAssignment> {
    plan.actors()
        .into_iter()
        .map(|robot| {
            let mine = plan.for_actor(&robot);
            let resources: BTreeSet<String> = mine
                .entries
                .iter()
                .filter_map(|e| match GridAction::parse_id(&e.action) {
                    Some(GridAction::Gather { resource, .. }) => Some(resource),
                    _ => None,
                })
                .collect();
            RobotAssignment { robot, plan: mine, resources: resources.into_iter().collect() }
        })
        .collect()
}
