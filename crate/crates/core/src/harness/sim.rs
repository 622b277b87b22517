use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{Scenario, ScenarioError};
use crate::bdi::{Agent, GoalPlanLibrary, GoalStatus};
use crate::events::{self, LogEvent};
use crate::exec::{Notification, NotificationKind};
use crate::grid::{describe_changes, EventKind, EventSource, ExternalEvent, GridWorld};
use crate::model::{Model, Tick};
use crate::planner::PlannerAdapter;
use crate::rational::{format_rational, Rational};
use crate::rt::ScheduleTrace;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalOutcome {
    pub id: String,
    pub status: GoalStatus,
}

/// Summary of a finished run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub ticks: Tick,
    pub cycles: u64,
    pub goals: Vec<GoalOutcome>,
    pub achieved: usize,
    pub dropped: usize,
    pub expired: usize,
    pub planner_calls: u64,
    pub library_size_start: usize,
    pub library_size_end: usize,
    pub notifications: Vec<Notification>,
    pub max_load: String,
    pub deadline_misses: usize,
}

impl Report {
    /// Every top-level goal achieved.
    pub fn success(&self) -> bool {
        self.goals.iter().all(|g| g.status == GoalStatus::Achieved)
    }

    pub fn unschedulable(&self) -> impl Iterator<Item = &Notification> {
        self.notifications.iter().filter(|n| n.kind == NotificationKind::Unschedulable)
    }
}

/// A running simulation: the world, the agent and the run log. One call
/// to [`Simulation::step`] advances one tick.
pub struct Simulation {
    pub scenario: Scenario,
    pub world: GridWorld,
    pub agent: Agent,
    pub log: Vec<LogEvent>,
    /// Next tick to simulate.
    pub tick: Tick,
    script: VecDeque<ExternalEvent>,
    injected: Vec<ExternalEvent>,
    library_size_start: usize,
    finished: bool,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Simulation, ScenarioError> {
        Self::with_options(scenario, None, None)
    }

    /// `planner` overrides the scenario's planner; `library` adds plans
    /// learned in earlier runs.
    pub fn with_options(
        scenario: Scenario,
        planner: Option<&str>,
        library: Option<&GoalPlanLibrary>,
    ) -> Result<Simulation, ScenarioError> {
        let (model, mut lib) = scenario.validate()?;
        if let Some(extra) = library {
            lib.merge(extra)?;
        }
        let planner = PlannerAdapter::parse(planner.unwrap_or(&scenario.planner)).map_err(ScenarioError::Invalid)?;
        let world = GridWorld::new(&scenario.world);
        let beliefs = world.read_sensing_data(&model);
        let mut script: Vec<ExternalEvent> = scenario.events.clone();
        script.sort_by_key(|e| e.at);
        let library_size_start = lib.len();
        let agent = Agent::new(
            model,
            scenario.desires.clone(),
            lib,
            beliefs,
            planner,
            scenario.agent.clone(),
            scenario.tasks.clone(),
        );
        Ok(Simulation {
            scenario,
            world,
            agent,
            log: Vec::new(),
            tick: 0,
            script: script.into(),
            injected: Vec::new(),
            library_size_start,
            finished: false,
        })
    }

    pub fn model(&self) -> &Model {
        &self.agent.model
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Queues an event for the next simulated tick; returns that tick.
    pub fn inject(&mut self, kind: EventKind) -> Tick {
        self.injected.push(ExternalEvent { at: self.tick, kind, source: EventSource::Ui });
        self.tick
    }

    /// Simulates one tick and returns the log lines it produced.
    pub fn step(&mut self) -> &[LogEvent] {
        let start = self.log.len();
        if self.finished {
            return &self.log[start..];
        }
        let t = self.tick;
        let model = &self.agent.model;
        let mut due = Vec::new();
        while self.script.front().is_some_and(|e| e.at <= t) {
            due.push(self.script.pop_front().unwrap());
        }
        due.append(&mut self.injected);
        for e in due {
            match self.world.inject_event(&e.kind, model) {
                Ok(()) => self.log.push(LogEvent::new(t, events::PLAYER_INTERACTION, e.kind.to_string())),
                Err(why) => self.log.push(LogEvent::new(t, events::EVENT_REJECTED, why)),
            }
        }

        self.world.tick = t;
        let completions = self.world.step_world(t, model);
        if !completions.is_empty() {
            let now = self.world.read_sensing_data(model);
            let detail = describe_changes(&self.agent.beliefs, &now, &self.world);
            self.log.push(LogEvent::new(t, events::READ_SENSING_DATA, detail));
            self.agent.beliefs = now;
        }
        self.agent.on_completions(&completions, &mut self.world, t, &mut self.log);
        let idle = self.world.in_flight.is_empty();
        self.agent.tick(t, &completions, idle, &mut self.world, &mut self.log);

        self.tick += 1;
        let quiet = self.script.is_empty() && self.agent.desires.is_empty() && self.agent.is_settled();
        if self.tick >= self.scenario.horizon || (quiet && self.agent.exec.notifications.is_empty()) {
            self.finished = true;
        }
        &self.log[start..]
    }

    pub fn run_to_end(&mut self) -> Report {
        while !self.finished {
            self.step();
        }
        self.report()
    }

    pub fn trace(&self) -> &ScheduleTrace {
        &self.agent.exec.scheduler.trace
    }

    pub fn log_text(&self) -> String {
        let mut s = String::new();
        for e in &self.log {
            s.push_str(&e.to_string());
            s.push('\n');
        }
        s
    }

    /// `tick,job,share,cumulative,capacity`, one row per granted share.
    pub fn trace_csv(&self) -> String {
        trace_csv(self.trace(), self.agent.config.capacity)
    }

    pub fn report(&self) -> Report {
        let top: Vec<GoalOutcome> = self
            .agent
            .goals
            .iter()
            .filter(|g| g.parent.is_none())
            .map(|g| GoalOutcome { id: g.id.clone(), status: g.status })
            .chain(self.agent.desires.iter().map(|d| GoalOutcome { id: d.id.clone(), status: GoalStatus::Pending }))
            .collect();
        let count = |s: GoalStatus| top.iter().filter(|g| g.status == s).count();
        Report {
            scenario: self.scenario.name.clone(),
            ticks: self.tick,
            cycles: self.agent.cycles,
            achieved: count(GoalStatus::Achieved),
            dropped: count(GoalStatus::Dropped),
            expired: count(GoalStatus::Expired),
            goals: top,
            planner_calls: self.agent.planner_calls,
            library_size_start: self.library_size_start,
            library_size_end: self.agent.library.len(),
            notifications: self.agent.history.clone(),
            max_load: format_rational(&self.trace().max_load()),
            deadline_misses: self.trace().misses().count(),
        }
    }
}

pub fn trace_csv(trace: &ScheduleTrace, capacity: Rational) -> String {
    let mut out = String::from("tick,job,share,cumulative,capacity\n");
    let cap = format_rational(&capacity);
    for rec in &trace.records {
        let mut cum = Rational::from_integer(0);
        for (job, share) in &rec.shares {
            cum += *share;
            out.push_str(&format!("{},{job},{},{},{cap}\n", rec.tick, format_rational(share), format_rational(&cum)));
        }
    }
    out
}

/// Per-tick total load, for plotting and checks.
pub fn loads(trace: &ScheduleTrace) -> BTreeMap<Tick, Rational> {
    trace.records.iter().map(|r| (r.tick, r.load())).collect()
}
