//! Execution and monitoring: admission of intentions, activation of
//! atomic actions as real-time tasks, context and postcondition checks,
//! aborts and notifications to the BDI layer.

mod intention;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::grid::{ActuationCommand, Completion, GridWorld};
use crate::model::{evaluate, BeliefSet, Model, Tick};
use crate::plan::{path_text, NodePath, Ready};
use crate::rational::Rational;
use crate::rt::{admit, bind_tasks, Admission, CbsServer, RtTask, Scheduler, TaskLibrary};

pub use intention::{Intention, IntentionStatus, RunningAction};

/// Sensing and actuation interface of the environment.
pub trait Environment {
    fn sense(&self, model: &Model) -> BeliefSet;
    fn actuate(&mut self, cmd: ActuationCommand, model: &Model) -> Result<(), String>;
    fn cancel(&mut self, actor: &str);
}

impl Environment for GridWorld {
    fn sense(&self, model: &Model) -> BeliefSet {
        self.read_sensing_data(model)
    }

    fn actuate(&mut self, cmd: ActuationCommand, model: &Model) -> Result<(), String> {
        GridWorld::actuate(self, cmd, model)
    }

    fn cancel(&mut self, actor: &str) {
        GridWorld::cancel(self, actor);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NotificationKind {
    PreconditionFailed,
    ContextViolated,
    PostconditionFailed,
    Unschedulable,
    PlanCompleted,
    DeadlineMissed,
}

impl NotificationKind {
    pub fn name(self) -> &'static str {
        match self {
            NotificationKind::PreconditionFailed => "PreconditionFailed",
            NotificationKind::ContextViolated => "ContextViolated",
            NotificationKind::PostconditionFailed => "PostconditionFailed",
            NotificationKind::Unschedulable => "Unschedulable",
            NotificationKind::PlanCompleted => "PlanCompleted",
            NotificationKind::DeadlineMissed => "DeadlineMissed",
        }
    }

    /// Whether the intention is aborted together with the notification.
    pub fn aborts(self) -> bool {
        !matches!(self, NotificationKind::Unschedulable | NotificationKind::PlanCompleted)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub kind: NotificationKind,
    pub intention: String,
    pub tick: Tick,
    pub detail: String,
    /// For schedulability rejections: the first violating tick and the
    /// competing tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violating_tick: Option<Tick>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tasks: Vec<String>,
}

impl fmt::Display for Notification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.intention, self.detail)
    }
}

/// Real-time layer state shared by all intentions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecutionState {
    pub scheduler: Scheduler,
    pub tasks: TaskLibrary,
    /// Waiting to be consumed by the next reasoning cycle.
    pub notifications: Vec<Notification>,
}

impl ExecutionState {
    pub fn new(capacity: Rational, server: CbsServer, tasks: TaskLibrary) -> Self {
        ExecutionState { scheduler: Scheduler::new(capacity, server), tasks, notifications: Vec::new() }
    }

    /// Capacity available to intentions once the server is reserved.
    pub fn intention_capacity(&self) -> Rational {
        self.scheduler.intention_capacity()
    }

    pub fn notify(&mut self, n: Notification) {
        self.notifications.push(n);
    }

    pub fn drain(&mut self) -> Vec<Notification> {
        std::mem::take(&mut self.notifications)
    }
}

/// Reserved tasks of every intention other than `except`, from `t` on.
fn reservations(intentions: &[Intention], except: &str, t: Tick) -> Vec<RtTask> {
    intentions
        .iter()
        .filter(|i| i.id != except && i.is_live())
        .flat_map(|i| i.reserved.values().flatten())
        .filter(|task| task.end_tick() > t)
        .cloned()
        .collect()
}

/// Binds the plan's nominal schedule from `t` and runs admission against
/// the other intentions' reservations. On acceptance the intention is
/// running and its tasks are reserved.
pub fn admit_intention(
    idx: usize,
    intentions: &mut [Intention],
    state: &ExecutionState,
    model: &Model,
    t: Tick,
) -> Result<Admission, crate::model::ModelError> {
    let others = reservations(intentions, &intentions[idx].id, t);
    let int = &mut intentions[idx];
    let schedule = int.plan.schedule(model)?;
    let mut candidate = BTreeMap::new();
    let mut nominal = BTreeMap::new();
    for s in &schedule {
        let start = int.started_at + s.start;
        let origin = int.origin(&s.path);
        candidate.insert(s.path.clone(), bind_tasks(&s.atomic, start, &origin, model, &state.tasks)?);
        nominal.insert(s.path.clone(), start);
    }
    let all: Vec<RtTask> = candidate.values().flatten().cloned().collect();
    let verdict = admit(&others, &all, state.intention_capacity());
    if verdict.is_accept() {
        int.reserved = candidate;
        int.nominal = nominal;
        int.status = IntentionStatus::Running;
    }
    Ok(verdict)
}

/// Removes the intention's tasks, cancels its in-flight commands, marks
/// its frontier aborted and queues the notification.
pub fn abort_intention(
    int: &mut Intention,
    reason: Notification,
    state: &mut ExecutionState,
    env: &mut dyn Environment,
) {
    retire_intention(int, state, env);
    state.notify(reason);
}

/// Abort without notification, used when the BDI layer itself drops an
/// intention.
pub fn retire_intention(int: &mut Intention, state: &mut ExecutionState, env: &mut dyn Environment) {
    for ra in int.running.values() {
        env.cancel(&ra.actor);
    }
    int.running.clear();
    int.reserved.clear();
    state.scheduler.cancel_prefix(&format!("{}/", int.id));
    int.frontier.abort_all(&int.plan);
    int.status = IntentionStatus::Aborted;
}

fn notification(kind: NotificationKind, int: &Intention, t: Tick, detail: String) -> Notification {
    Notification { kind, intention: int.id.clone(), tick: t, detail, violating_tick: None, tasks: Vec::new() }
}

/// Step 1: completions of this tick. Postconditions are checked against
/// the freshly sensed beliefs; success advances the frontier.
pub fn process_completions(
    completions: &[Completion],
    b: &BeliefSet,
    intentions: &mut [Intention],
    state: &mut ExecutionState,
    model: &Model,
    env: &mut dyn Environment,
    t: Tick,
) {
    for c in completions {
        let Some(int) = intentions
            .iter_mut()
            .find(|i| i.status == IntentionStatus::Running && i.running.values().any(|r| r.actor == c.command.actor))
        else {
            continue;
        };
        let path = int.running.iter().find(|(_, r)| r.actor == c.command.actor).map(|(p, _)| p.clone()).unwrap();
        let ra = int.running.remove(&path).unwrap();
        state.scheduler.cancel_origin(&ra.origin);
        let post_ok = model.action(&ra.action).is_some_and(|spec| evaluate(&spec.post, b).unwrap_or(false));
        if !post_ok {
            let detail = format!(
                "{} of {} ({}) does not hold after {}",
                "postcondition",
                int.plan.id,
                path_text(&path),
                ra.action
            );
            let n = notification(NotificationKind::PostconditionFailed, int, t, detail);
            abort_intention(int, n, state, env);
            continue;
        }
        if int.frontier.complete(&int.plan, &path, t).is_err() {
            log::error!("frontier rejected completion of {} in {}", path_text(&path), int.id);
        }
        if int.frontier.is_done() {
            int.status = IntentionStatus::Completed;
            int.reserved.clear();
            let detail = format!("plan {} completed", int.plan.id);
            state.notify(notification(NotificationKind::PlanCompleted, int, t, detail));
        }
    }
}

/// What the monitor asks of the BDI layer besides notifications.
#[derive(Debug, Clone, PartialEq)]
pub struct SubGoalRequest {
    pub intention: String,
    pub path: NodePath,
    pub spec: crate::plan::SubGoalSpec,
}

/// Steps 2 and 3: deadline and context monitoring, then activation of
/// ready atomics (precondition, admission, actuation). `truth` is this
/// tick's ground-truth snapshot, `b` the agent's beliefs.
#[allow(clippy::too_many_arguments)]
pub fn progress_intentions(
    b: &BeliefSet,
    truth: &BeliefSet,
    intentions: &mut [Intention],
    deadlines: &BTreeMap<String, Tick>,
    state: &mut ExecutionState,
    model: &Model,
    env: &mut dyn Environment,
    t: Tick,
) -> Vec<SubGoalRequest> {
    let mut requests = Vec::new();
    for idx in 0..intentions.len() {
        if intentions[idx].status != IntentionStatus::Running {
            continue;
        }
        if let Some(&d) = deadlines.get(&intentions[idx].goal) {
            if t > d {
                let int = &mut intentions[idx];
                let n = notification(
                    NotificationKind::DeadlineMissed,
                    int,
                    t,
                    format!("deadline {d} of {} passed", int.goal),
                );
                abort_intention(int, n, state, env);
                continue;
            }
        }
        let ready = intentions[idx].frontier.ready(&intentions[idx].plan, t);
        for r in ready {
            match r {
                Ready::SubGoal { path, spec } => {
                    let int = &mut intentions[idx];
                    let _ = int.frontier.start(&int.plan, &path, t);
                    requests.push(SubGoalRequest { intention: int.id.clone(), path, spec });
                }
                Ready::Atomic { path, atomic } => {
                    if !start_atomic(idx, &path, &atomic, b, intentions, state, model, env, t) {
                        break;
                    }
                }
            }
        }
        if intentions[idx].status == IntentionStatus::Running {
            check_contexts(&mut intentions[idx], truth, state, model, env, t);
        }
    }
    requests
}

/// Returns false when the intention was aborted.
#[allow(clippy::too_many_arguments)]
fn start_atomic(
    idx: usize,
    path: &NodePath,
    atomic: &crate::plan::AtomicPlan,
    b: &BeliefSet,
    intentions: &mut [Intention],
    state: &mut ExecutionState,
    model: &Model,
    env: &mut dyn Environment,
    t: Tick,
) -> bool {
    let Some(spec) = model.action(&atomic.action) else {
        let int = &mut intentions[idx];
        let n = notification(NotificationKind::PreconditionFailed, int, t, format!("unknown action {}", atomic.action));
        abort_intention(int, n, state, env);
        return false;
    };
    if !evaluate(&spec.pre, b).unwrap_or(false) {
        let int = &mut intentions[idx];
        let detail = format!("precondition {} of {} does not hold", spec.pre, atomic.action);
        let n = notification(NotificationKind::PreconditionFailed, int, t, detail);
        abort_intention(int, n, state, env);
        return false;
    }
    // Re-admit when the actual start differs from the reserved one.
    if intentions[idx].nominal.get(path) != Some(&t) {
        let origin = intentions[idx].origin(path);
        let Ok(tasks) = bind_tasks(atomic, t, &origin, model, &state.tasks) else { return true };
        let mut others = reservations(intentions, &intentions[idx].id, t);
        others.extend(intentions[idx].reserved.iter().filter(|(p, _)| *p != path).flat_map(|(_, v)| v.iter().cloned()));
        others.retain(|task| task.end_tick() > t);
        match admit(&others, &tasks, state.intention_capacity()) {
            Admission::Accept => {
                let int = &mut intentions[idx];
                int.reserved.insert(path.clone(), tasks);
                int.nominal.insert(path.clone(), t);
            }
            Admission::Reject { tick, tasks, reason } => {
                let int = &mut intentions[idx];
                if int.unschedulable.insert(path.clone()) {
                    let mut n = notification(
                        NotificationKind::Unschedulable,
                        int,
                        t,
                        format!("{} of {} cannot be scheduled: {reason}", atomic.action, int.plan.id),
                    );
                    n.violating_tick = Some(tick);
                    n.tasks = tasks;
                    state.notify(n);
                }
                return true;
            }
        }
    }
    let int = &mut intentions[idx];
    let cmd = ActuationCommand {
        actor: atomic.actor.clone(),
        action: atomic.action.clone(),
        started_at: t,
        completes_at: t + spec.duration,
    };
    if let Err(e) = env.actuate(cmd, model) {
        // Busy or absent actor: try again next tick.
        log::debug!("{}: cannot actuate {}: {e}", int.id, atomic.action);
        return true;
    }
    let _ = int.frontier.start(&int.plan, path, t);
    let origin = int.origin(path);
    for task in int.reserved.get(path).cloned().unwrap_or_default() {
        state.scheduler.add_task(task);
    }
    int.running.insert(
        path.clone(),
        RunningAction {
            node: path.clone(),
            action: atomic.action.clone(),
            actor: atomic.actor.clone(),
            started_at: t,
            ends_at: t + spec.duration,
            origin,
        },
    );
    true
}

fn check_contexts(
    int: &mut Intention,
    truth: &BeliefSet,
    state: &mut ExecutionState,
    model: &Model,
    env: &mut dyn Environment,
    t: Tick,
) {
    let violated = int.running.values().find_map(|ra| {
        let spec = model.action(&ra.action)?;
        (!evaluate(&spec.context, truth).unwrap_or(false)).then(|| (ra.action.clone(), spec.context.to_string()))
    });
    if let Some((action, ctx)) = violated {
        let n = notification(NotificationKind::ContextViolated, int, t, format!("context {ctx} of {action} violated"));
        abort_intention(int, n, state, env);
    }
}

/// Step 4: dispatches the real-time layer for tick `t`.
pub fn dispatch(state: &mut ExecutionState, t: Tick) -> &crate::rt::TickRecord {
    state.scheduler.step(t)
}

/// Runs the whole monitor for one tick, in order: completions, deadline
/// and context checks plus activation of ready atomics, EDF dispatch.
#[allow(clippy::too_many_arguments)]
pub fn rt_progress_and_monitor(
    completions: &[Completion],
    b: &BeliefSet,
    truth: &BeliefSet,
    intentions: &mut [Intention],
    deadlines: &BTreeMap<String, Tick>,
    state: &mut ExecutionState,
    model: &Model,
    env: &mut dyn Environment,
    t: Tick,
) -> Vec<SubGoalRequest> {
    process_completions(completions, b, intentions, state, model, env, t);
    let req = progress_intentions(b, truth, intentions, deadlines, state, model, env, t);
    dispatch(state, t);
    req
}
