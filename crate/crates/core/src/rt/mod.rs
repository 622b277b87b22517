//! Real-time layer: task model, EDF dispatching with a CBS server for
//! aperiodic work, and admission analysis.

mod admit;
mod edf;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Model, ModelError, Tick};
use crate::plan::AtomicPlan;
use crate::rational::{self, Rational};

pub use admit::{admit, Admission};
pub use edf::{edf_dispatch, CbsServer, ScheduleTrace, Scheduler, TickRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TaskKind {
    PeriodicInInterval {
        period: Tick,
        #[serde(with = "rational::serde_text")]
        job_cost: Rational,
        start: Tick,
        end: Tick,
    },
    Aperiodic {
        release: Tick,
        #[serde(with = "rational::serde_text")]
        cost: Rational,
        relative_deadline: Tick,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RtTask {
    pub id: String,
    #[serde(flatten)]
    pub kind: TaskKind,
    /// Intention id and node path, or `system`.
    pub origin: String,
    #[serde(with = "rational::serde_text")]
    pub rate: Rational,
}

impl RtTask {
    pub fn periodic(id: impl Into<String>, origin: impl Into<String>, start: Tick, end: Tick, rate: Rational) -> Self {
        RtTask {
            id: id.into(),
            kind: TaskKind::PeriodicInInterval { period: 1, job_cost: rate, start, end },
            origin: origin.into(),
            rate,
        }
    }

    pub fn aperiodic(
        id: impl Into<String>,
        origin: impl Into<String>,
        release: Tick,
        cost: Rational,
        relative_deadline: Tick,
        rate: Rational,
    ) -> Self {
        RtTask {
            id: id.into(),
            kind: TaskKind::Aperiodic { release, cost, relative_deadline },
            origin: origin.into(),
            rate,
        }
    }

    pub fn validate(&self, capacity: Rational) -> Result<(), String> {
        let zero = Rational::from_integer(0);
        if self.rate <= zero || self.rate > capacity {
            return Err(format!("task {}: rate {} outside (0, {}]", self.id, self.rate, capacity));
        }
        match &self.kind {
            TaskKind::PeriodicInInterval { period, job_cost, start, end } => {
                if *period < 1 {
                    return Err(format!("task {}: period must be at least 1", self.id));
                }
                if end <= start {
                    return Err(format!("task {}: empty interval [{start}, {end})", self.id));
                }
                if *job_cost <= zero || *job_cost > self.rate * Rational::from_integer(*period as i64) {
                    return Err(format!("task {}: job cost {} exceeds period x rate", self.id, job_cost));
                }
            }
            TaskKind::Aperiodic { cost, relative_deadline, .. } => {
                if *cost <= zero || *relative_deadline < 1 {
                    return Err(format!("task {}: bad aperiodic parameters", self.id));
                }
            }
        }
        Ok(())
    }

    /// First tick the task may run.
    pub fn first_tick(&self) -> Tick {
        match self.kind {
            TaskKind::PeriodicInInterval { start, .. } => start,
            TaskKind::Aperiodic { release, .. } => release,
        }
    }

    /// Tick after the last one the task may run.
    pub fn end_tick(&self) -> Tick {
        match self.kind {
            TaskKind::PeriodicInInterval { end, .. } => end,
            TaskKind::Aperiodic { release, relative_deadline, .. } => release + relative_deadline,
        }
    }

    /// Whether the task's interval covers `t` (periodic tasks only).
    pub fn covers(&self, t: Tick) -> bool {
        matches!(self.kind, TaskKind::PeriodicInInterval { start, end, .. } if start <= t && t < end)
    }

    /// All jobs of the task.
    pub fn jobs(&self) -> Vec<Job> {
        match self.kind {
            TaskKind::PeriodicInInterval { period, job_cost, start, end } => {
                let mut out = Vec::new();
                let mut r = start;
                while r < end {
                    out.push(Job {
                        task_id: self.id.clone(),
                        release: r,
                        remaining: job_cost,
                        absolute_deadline: (r + period).min(end),
                        rate: self.rate,
                    });
                    r += period;
                }
                out
            }
            TaskKind::Aperiodic { release, cost, relative_deadline } => vec![Job {
                task_id: self.id.clone(),
                release,
                remaining: cost,
                absolute_deadline: release + relative_deadline,
                rate: self.rate,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub task_id: String,
    pub release: Tick,
    #[serde(with = "rational::serde_text")]
    pub remaining: Rational,
    pub absolute_deadline: Tick,
    /// Per-tick cap inherited from the task.
    #[serde(with = "rational::serde_text")]
    pub rate: Rational,
}

impl Job {
    pub fn id(&self) -> String {
        format!("{}@{}", self.task_id, self.release)
    }
}

impl fmt::Display for Job {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (rem {}, d {})", self.id(), rational::format_rational(&self.remaining), self.absolute_deadline)
    }
}

/// One low-level task produced for an action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskTemplate {
    #[serde(default = "one_tick")]
    pub period: Tick,
    #[serde(with = "rational::serde_text")]
    pub rate: Rational,
}

fn one_tick() -> Tick {
    1
}

/// Maps action names to low-level tasks. Actions without an entry get
/// one task with period 1 and rate equal to the action cost.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskLibrary {
    pub custom: BTreeMap<String, Vec<TaskTemplate>>,
}

impl TaskLibrary {
    /// Checked when the scenario is loaded.
    pub fn validate(&self, model: &Model) -> Result<(), ModelError> {
        for (name, templates) in &self.custom {
            if !model.actions.iter().any(|a| &a.name == name) {
                return Err(ModelError::Invalid(format!("task mapping for unknown action `{name}`")));
            }
            if templates.is_empty() {
                return Err(ModelError::Invalid(format!("empty task mapping for `{name}`")));
            }
            let total: Rational = templates.iter().map(|t| t.rate).sum();
            if templates.iter().any(|t| t.period < 1 || t.rate <= Rational::from_integer(0)) || total > model.capacity {
                return Err(ModelError::Invalid(format!("bad task mapping for `{name}`")));
            }
        }
        Ok(())
    }
}

/// Tasks covering `[start, start + duration)` for one atomic plan.
pub fn bind_tasks(
    atomic: &AtomicPlan,
    start: Tick,
    origin: &str,
    model: &Model,
    library: &TaskLibrary,
) -> Result<Vec<RtTask>, ModelError> {
    let spec = model.require_action(&atomic.action)?;
    let end = start + spec.duration;
    let tasks = match library.custom.get(&spec.name) {
        None => vec![RtTask::periodic(origin, origin, start, end, spec.cost)],
        Some(templates) => templates
            .iter()
            .enumerate()
            .map(|(i, t)| RtTask {
                id: format!("{origin}.{i}"),
                kind: TaskKind::PeriodicInInterval {
                    period: t.period,
                    job_cost: t.rate * Rational::from_integer(t.period as i64),
                    start,
                    end,
                },
                origin: origin.to_string(),
                rate: t.rate,
            })
            .collect(),
    };
    Ok(tasks)
}
