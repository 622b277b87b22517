use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bdi::{AgentConfig, Desire, GoalPlanLibrary, LibraryError};
use crate::grid::{build_model, DomainConfig, EventKind, ExternalEvent, WorldConfig};
use crate::model::{Cell, Model, ModelError, Tick};
use crate::plan::Plan;
use crate::planner::PlannerAdapter;
use crate::rt::TaskLibrary;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Library(#[from] LibraryError),
}

fn builtin() -> String {
    "builtin".into()
}

/// A complete, self-contained simulation setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub world: WorldConfig,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub desires: Vec<Desire>,
    /// Initial goal-plan library.
    #[serde(default)]
    pub library: Vec<Plan>,
    #[serde(default)]
    pub agent: AgentConfig,
    /// Per-action task sets overriding the default one-task binding.
    #[serde(default)]
    pub tasks: TaskLibrary,
    #[serde(default)]
    pub events: Vec<ExternalEvent>,
    /// `builtin` or `external:<command>`.
    #[serde(default = "builtin")]
    pub planner: String,
    pub horizon: Tick,
    /// Unused: runs are deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        let mut s = Scenario::from_json(&text)?;
        if s.name.is_empty() {
            s.name = path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(s)
    }

    /// Every robot that may appear, declared or spawned by the script.
    pub fn robot_ids(&self) -> Vec<String> {
        let mut ids = self.world.robot_ids();
        for e in &self.events {
            if let EventKind::SpawnRobot { robot, .. } = &e.kind {
                if !ids.contains(robot) {
                    ids.push(robot.clone());
                }
            }
        }
        ids
    }

    /// Every resource with its cell, declared or added by the script.
    pub fn resource_cells(&self) -> Vec<(String, Cell)> {
        let mut out: Vec<(String, Cell)> = self.world.resources.iter().map(|r| (r.id.clone(), r.at)).collect();
        for e in &self.events {
            if let EventKind::AddResource { resource, at, .. } = &e.kind {
                if !out.iter().any(|(id, _)| id == resource) {
                    out.push((resource.clone(), *at));
                }
            }
        }
        out
    }

    fn sample_bound(&self) -> i64 {
        let mut n: i64 = self.world.resources.iter().map(|r| r.count).sum();
        for e in &self.events {
            if let EventKind::AddResource { count, .. } = &e.kind {
                n += count;
            }
        }
        n
    }

    pub fn build_model(&self) -> Result<Model, ScenarioError> {
        Ok(build_model(
            &self.world,
            &self.domain,
            &self.robot_ids(),
            &self.resource_cells(),
            self.sample_bound(),
            self.agent.capacity,
        )?)
    }

    /// Checks the scenario and returns its model and initial library.
    pub fn validate(&self) -> Result<(Model, GoalPlanLibrary), ScenarioError> {
        let invalid = |m: String| ScenarioError::Invalid(m);
        if self.horizon < 1 {
            return Err(invalid("horizon must be at least 1".into()));
        }
        self.world.validate().map_err(invalid)?;
        let model = self.build_model()?;
        if self.agent.server_period < 1 || self.agent.server_budget > self.agent.capacity {
            return Err(invalid("server budget and period do not fit the capacity".into()));
        }
        let mut ids = BTreeSet::new();
        for d in &self.desires {
            if !ids.insert(&d.id) {
                return Err(invalid(format!("duplicate desire `{}`", d.id)));
            }
            d.validate(&model)?;
        }
        let library = GoalPlanLibrary::from_plans(self.library.clone(), &model)?;
        if library.len() != self.library.len() {
            return Err(invalid("library contains duplicate plans".into()));
        }
        self.tasks.validate(&model)?;
        let robots = self.robot_ids();
        for e in &self.events {
            let robot = match &e.kind {
                EventKind::MoveRobot { robot, .. } | EventKind::SpawnRobot { robot, .. } => Some(robot),
                _ => None,
            };
            if let Some(r) = robot {
                if !robots.contains(r) {
                    return Err(invalid(format!("event at {} names unknown robot `{r}`", e.at)));
                }
            }
        }
        PlannerAdapter::parse(&self.planner).map_err(invalid)?;
        Ok((model, library))
    }
}
