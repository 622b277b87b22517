//! The BDI layer: desires, active goals, the goal-plan library,
//! intentions and the reasoning cycle.

mod goals;
mod library;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::events::{self, LogEvent};
use crate::exec::{
    self, admit_intention, progress_intentions, retire_intention, Environment, ExecutionState, Notification,
    NotificationKind, SubGoalRequest,
};
use crate::grid::{coordinator_dispatch, Completion};
use crate::model::{evaluate, BeliefSet, Formula, Model, Tick};
use crate::plan::{from_time_triggered, path_text, Plan, PlanNode};
use crate::planner::{PlannerAdapter, PlannerError, PlanningProblem};
use crate::rational::{self, Rational};
use crate::rt::{Admission, CbsServer, RtTask, TaskLibrary};

pub use crate::exec::{Intention, IntentionStatus};
pub use goals::{priority_order, update_active_goals, ActiveGoal, Desire, GoalStatus, GoalUpdate, ParentLink};
pub use library::{lookup_plan, GoalPlanLibrary, LibraryError};

fn one() -> Rational {
    Rational::from_integer(1)
}

fn default_budget() -> Rational {
    Rational::new(1, 10)
}

fn default_period() -> Tick {
    10
}

fn default_system_cost() -> Rational {
    Rational::new(1, 20)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Processor capacity U.
    #[serde(default = "one", with = "rational::serde_text")]
    pub capacity: Rational,
    /// CBS budget Q.
    #[serde(default = "default_budget", with = "rational::serde_text")]
    pub server_budget: Rational,
    /// CBS period P.
    #[serde(default = "default_period")]
    pub server_period: Tick,
    /// Work of the system job submitted to the server at every cycle.
    #[serde(default = "default_system_cost", with = "rational::serde_text")]
    pub system_job_cost: Rational,
    /// Split fleet plans into one intention per robot.
    #[serde(default)]
    pub coordinator: bool,
    /// Symbols whose current value becomes part of the context of every
    /// generated plan, so that a change forces replanning.
    #[serde(default)]
    pub replan_on: Vec<String>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            capacity: one(),
            server_budget: default_budget(),
            server_period: default_period(),
            system_job_cost: default_system_cost(),
            coordinator: false,
            replan_on: Vec::new(),
        }
    }
}

/// A real-time BDI agent.
pub struct Agent {
    pub model: Model,
    /// Desires not yet activated.
    pub desires: Vec<Desire>,
    pub goals: Vec<ActiveGoal>,
    pub intentions: Vec<Intention>,
    pub library: GoalPlanLibrary,
    pub beliefs: BeliefSet,
    pub exec: ExecutionState,
    pub planner: PlannerAdapter,
    pub config: AgentConfig,
    /// Reasoning cycles run so far.
    pub cycles: u64,
    pub planner_calls: u64,
    /// Every notification raised so far, in order.
    pub history: Vec<Notification>,
    next_intention: u64,
    subgoal_requests: Vec<SubGoalRequest>,
}

impl Agent {
    pub fn new(
        model: Model,
        desires: Vec<Desire>,
        library: GoalPlanLibrary,
        beliefs: BeliefSet,
        planner: PlannerAdapter,
        config: AgentConfig,
        tasks: TaskLibrary,
    ) -> Self {
        let server = CbsServer::new("cbs", config.server_budget, config.server_period);
        Agent {
            exec: ExecutionState::new(config.capacity, server, tasks),
            model,
            desires,
            goals: Vec::new(),
            intentions: Vec::new(),
            library,
            beliefs,
            planner,
            config,
            cycles: 0,
            planner_calls: 0,
            history: Vec::new(),
            next_intention: 1,
            subgoal_requests: Vec::new(),
        }
    }

    fn goal_index(&self, id: &str) -> Option<usize> {
        self.goals.iter().position(|g| g.id == id)
    }

    fn live_intentions(&self, goal: &str) -> Vec<usize> {
        (0..self.intentions.len())
            .filter(|&i| self.intentions[i].goal == goal && self.intentions[i].is_live())
            .collect()
    }

    /// Whether tick `t` starts a reasoning cycle: the first tick, a tick
    /// at which action completions leave every robot idle, or any pending
    /// notification, sub-goal, open goal without intention or eligible
    /// desire.
    pub fn is_cycle_boundary(&self, t: Tick, completions: &[Completion], idle: bool) -> bool {
        t == 0
            || (!completions.is_empty() && idle)
            || !self.exec.notifications.is_empty()
            || !self.subgoal_requests.is_empty()
            || self.goals.iter().any(|g| g.status == GoalStatus::Pending)
            || self.desires.iter().any(|d| evaluate(&d.pre, &self.beliefs).unwrap_or(false))
    }

    /// Monitor step for this tick's completions, checked against the
    /// freshly sensed beliefs.
    pub fn on_completions(
        &mut self,
        completions: &[Completion],
        env: &mut dyn Environment,
        t: Tick,
        log: &mut Vec<LogEvent>,
    ) {
        let before = self.exec.notifications.len();
        exec::process_completions(
            completions,
            &self.beliefs,
            &mut self.intentions,
            &mut self.exec,
            &self.model,
            env,
            t,
        );
        self.log_notifications(before, log);
    }

    fn log_notifications(&mut self, from: usize, log: &mut Vec<LogEvent>) {
        for n in &self.exec.notifications[from..] {
            log.push(LogEvent::new(n.tick, n.kind.name(), n.to_string()));
            self.history.push(n.clone());
        }
    }

    /// Progresses intentions (admission of new intentions, deadline and
    /// context checks, activation of ready atomics) and dispatches the
    /// real-time layer. Runs every tick, logged only inside a cycle.
    fn progress(&mut self, env: &mut dyn Environment, t: Tick, log: &mut Vec<LogEvent>) {
        let before = self.exec.notifications.len();
        for idx in 0..self.intentions.len() {
            let int = &self.intentions[idx];
            if int.status != IntentionStatus::Scheduled || int.unschedulable.contains(&Vec::new()) {
                continue;
            }
            match admit_intention(idx, &mut self.intentions, &self.exec, &self.model, t) {
                Ok(Admission::Accept) => {}
                Ok(Admission::Reject { tick, tasks, reason }) => {
                    let int = &mut self.intentions[idx];
                    int.unschedulable.insert(Vec::new());
                    self.exec.notify(Notification {
                        kind: NotificationKind::Unschedulable,
                        intention: int.id.clone(),
                        tick: t,
                        detail: format!("plan {} rejected at admission: {reason}", int.plan.id),
                        violating_tick: Some(tick),
                        tasks,
                    });
                }
                Err(e) => {
                    let int = &mut self.intentions[idx];
                    let n = Notification {
                        kind: NotificationKind::PreconditionFailed,
                        intention: int.id.clone(),
                        tick: t,
                        detail: format!("plan {} cannot be bound: {e}", int.plan.id),
                        violating_tick: None,
                        tasks: Vec::new(),
                    };
                    exec::abort_intention(int, n, &mut self.exec, env);
                }
            }
        }
        let truth = env.sense(&self.model);
        let deadlines: BTreeMap<String, Tick> =
            self.goals.iter().map(|g| (g.id.clone(), g.absolute_deadline)).collect();
        let req = progress_intentions(
            &self.beliefs,
            &truth,
            &mut self.intentions,
            &deadlines,
            &mut self.exec,
            &self.model,
            env,
            t,
        );
        self.subgoal_requests.extend(req);
        self.log_notifications(before, log);
    }

    /// Everything the agent does at tick `t` after the world stepped and
    /// beliefs were refreshed. `idle` tells whether no command is in
    /// flight.
    pub fn tick(
        &mut self,
        t: Tick,
        completions: &[Completion],
        idle: bool,
        env: &mut dyn Environment,
        log: &mut Vec<LogEvent>,
    ) {
        if self.is_cycle_boundary(t, completions, idle) {
            self.reasoning_cycle(t, env, log);
        } else {
            self.progress(env, t, log);
        }
        exec::dispatch(&mut self.exec, t);
    }

    /// One reasoning cycle: goal update, intention selection, then
    /// progress and monitoring of intentions.
    pub fn reasoning_cycle(&mut self, t: Tick, env: &mut dyn Environment, log: &mut Vec<LogEvent>) {
        self.cycles += 1;
        log.push(LogEvent::new(t, events::REASONING_CYCLE, format!("execution {}", self.cycles)));
        let mut extra = Vec::new();
        let rejected = self.consume_notifications();
        self.open_subgoals(t);

        let uag = self.update_goals(t, env, &mut extra);
        log.push(LogEvent::new(t, events::UPDATE_ACTIVE_GOALS, uag));
        let si = self.select_intentions(t, env, &rejected, &mut extra);
        log.push(LogEvent::new(t, events::SELECT_INTENTIONS, si));
        let mut phase = Vec::new();
        self.progress(env, t, &mut phase);
        for int in self.intentions.iter_mut().filter(|i| i.status == IntentionStatus::Running) {
            int.steps += 1;
        }
        log.push(LogEvent::new(t, events::RT_PROGRESS, self.progress_summary()));
        log.extend(extra);
        log.extend(phase);

        let server = &self.exec.scheduler.server;
        let sys = RtTask::aperiodic(
            format!("sys{}", self.cycles),
            "system",
            t,
            self.config.system_job_cost,
            server.period,
            server.bandwidth(),
        );
        self.exec.scheduler.submit_aperiodic(sys, t);
    }

    /// Drains the notification queue. Aborting kinds return the goal to
    /// pending; the ids of intentions refused by admission are returned.
    fn consume_notifications(&mut self) -> BTreeSet<String> {
        let mut rejected = BTreeSet::new();
        for n in self.exec.drain() {
            let Some(int) = self.intentions.iter().find(|i| i.id == n.intention) else { continue };
            let goal = int.goal.clone();
            match n.kind {
                NotificationKind::Unschedulable => {
                    rejected.insert(n.intention.clone());
                }
                NotificationKind::PlanCompleted => {}
                _ => {
                    if let Some(g) = self.goal_index(&goal) {
                        if self.goals[g].status == GoalStatus::Pursued && self.live_intentions(&goal).is_empty() {
                            self.goals[g].status = GoalStatus::Pending;
                        }
                    }
                }
            }
        }
        rejected
    }

    fn open_subgoals(&mut self, t: Tick) {
        for r in std::mem::take(&mut self.subgoal_requests) {
            let Some(parent) = self.intentions.iter().find(|i| i.id == r.intention) else { continue };
            let parent_goal = self.goal_index(&parent.goal).map(|g| self.goals[g].clone());
            let id = format!("{}{}", parent.goal, path_text(&r.path));
            let priority = parent_goal.as_ref().map_or(0, |g| g.priority);
            self.goals.retain(|g| g.id != id);
            self.goals.push(ActiveGoal {
                id,
                goal: r.spec.goal.clone(),
                description: r.spec.description.clone(),
                priority,
                activated_at: t,
                absolute_deadline: t + r.spec.deadline,
                status: GoalStatus::Pending,
                parent: Some(ParentLink { intention: r.intention.clone(), path: r.path.clone() }),
                rejected: BTreeSet::new(),
            });
        }
    }

    fn update_goals(&mut self, t: Tick, env: &mut dyn Environment, extra: &mut Vec<LogEvent>) -> String {
        let known: BTreeSet<String> = self.goals.iter().map(|g| g.id.clone()).collect();
        let up = update_active_goals(&mut self.goals, &self.beliefs, &mut self.desires, t);
        let mut parts = Vec::new();
        for gi in priority_order(&self.goals) {
            let g = &self.goals[gi];
            let fresh = !known.contains(&g.id) || (g.activated_at == t && g.parent.is_some());
            let kind = if g.parent.is_some() { "sub-goal" } else { "goal" };
            let text = match g.status {
                _ if up.achieved.contains(&g.id) => format!("{kind} {} achieved", g.id),
                _ if up.expired.contains(&g.id) => format!("{kind} {} expired", g.id),
                GoalStatus::Pending | GoalStatus::Pursued if fresh => {
                    if g.description.is_empty() {
                        format!("pursue {kind} {}", g.id)
                    } else {
                        format!("pursue {kind} {}: \"{}\"", g.id, g.description)
                    }
                }
                GoalStatus::Pending | GoalStatus::Pursued => format!("{kind} {} still valid", g.id),
                _ => continue,
            };
            parts.push(text);
        }
        for id in up.expired.iter() {
            extra.push(LogEvent::new(t, events::GOAL_EXPIRED, format!("goal {id} passed its deadline")));
        }
        for id in up.achieved.iter().chain(up.expired.iter()) {
            self.settle_goal(id, t, env, extra);
        }
        if parts.is_empty() {
            "no active goals".into()
        } else {
            parts.join("; ")
        }
    }

    /// Retires the intentions of a settled goal and propagates the
    /// outcome to a parent intention.
    fn settle_goal(&mut self, id: &str, t: Tick, env: &mut dyn Environment, extra: &mut Vec<LogEvent>) {
        for i in self.live_intentions(id) {
            retire_intention(&mut self.intentions[i], &mut self.exec, env);
        }
        let Some(gi) = self.goal_index(id) else { return };
        let g = &self.goals[gi];
        let Some(link) = g.parent.clone() else { return };
        let achieved = g.status == GoalStatus::Achieved;
        let Some(pi) = self.intentions.iter().position(|i| i.id == link.intention && i.is_live()) else { return };
        if achieved {
            let p = &mut self.intentions[pi];
            let _ = p.frontier.complete(&p.plan, &link.path, t);
            if p.frontier.is_done() {
                p.status = IntentionStatus::Completed;
                p.reserved.clear();
            }
        } else {
            let parent_goal = self.intentions[pi].goal.clone();
            retire_intention(&mut self.intentions[pi], &mut self.exec, env);
            extra.push(LogEvent::new(
                t,
                events::INTENTION_ABORTED,
                format!("{} aborted: sub-goal {id} failed", self.intentions[pi].id),
            ));
            if let Some(pg) = self.goal_index(&parent_goal) {
                if self.goals[pg].status.is_open() {
                    self.goals[pg].status = GoalStatus::Pending;
                }
            }
        }
    }

    fn select_intentions(
        &mut self,
        t: Tick,
        env: &mut dyn Environment,
        rejected: &BTreeSet<String>,
        extra: &mut Vec<LogEvent>,
    ) -> String {
        let mut parts = Vec::new();
        for gi in priority_order(&self.goals) {
            if !self.goals[gi].status.is_open() {
                continue;
            }
            let gid = self.goals[gi].id.clone();
            let live = self.live_intentions(&gid);
            if let Some(&first) = live.first() {
                let plan = &self.intentions[first].plan;
                let refused = live.iter().any(|&i| rejected.contains(&self.intentions[i].id));
                let valid = evaluate(&plan.context, &self.beliefs).unwrap_or(false);
                if !refused && valid {
                    let ids: Vec<&str> = live.iter().map(|&i| self.intentions[i].id.as_str()).collect();
                    parts.push(format!("plan {} still valid, intention {} still active", plan.id, ids.join(", ")));
                    continue;
                }
                let plan_id = plan.id.clone();
                let reason = if refused {
                    self.goals[gi].rejected.insert(plan_id.clone());
                    format!("plan {plan_id} is not schedulable")
                } else {
                    format!("context {} of plan {plan_id} no longer holds", plan.context)
                };
                for i in live {
                    retire_intention(&mut self.intentions[i], &mut self.exec, env);
                    extra.push(LogEvent::new(
                        t,
                        events::INTENTION_ABORTED,
                        format!("{} aborted: {reason}", self.intentions[i].id),
                    ));
                }
                self.goals[gi].status = GoalStatus::Pending;
            }
            parts.push(self.pursue(gi, t, extra));
        }
        self.fail_orphaned_parents(t, env, extra);
        if parts.is_empty() {
            "no intentions".into()
        } else {
            parts.join("; ")
        }
    }

    /// Contingency order for a goal without an intention: library plan,
    /// then planner, then drop.
    fn pursue(&mut self, gi: usize, t: Tick, extra: &mut Vec<LogEvent>) -> String {
        let g = self.goals[gi].clone();
        if let Some(plan) = lookup_plan(&g, &self.library, &self.beliefs, t, &g.rejected).cloned() {
            let preview = self.preview(&plan);
            let ids = self.instantiate(plan.clone(), gi, t);
            return format!(
                "available plan {} ({preview}) selected to pursue {} in current intention {}{}",
                plan.id,
                g.id,
                ids.join(", "),
                self.dispatch_note(&ids)
            );
        }
        if t > g.absolute_deadline {
            return self.drop_goal(gi, t, "deadline already passed", events::PLANNER_FAILURE, extra);
        }
        let remaining = g.absolute_deadline - t;
        extra.push(LogEvent::new(
            t,
            events::PLANNER_INVOKED,
            format!("{} for {} within {remaining} ticks", self.planner.name(), g.id),
        ));
        self.planner_calls += 1;
        let problem = PlanningProblem::new(&self.model, self.beliefs.clone(), g.goal.clone(), remaining);
        let tt = match self.planner.plan(&problem) {
            Ok(Some(tt)) => tt,
            Ok(None) => {
                return self.drop_goal(
                    gi,
                    t,
                    &format!("no plan within {remaining} ticks"),
                    events::PLANNER_FAILURE,
                    extra,
                )
            }
            Err(e @ PlannerError::Unsupported(_)) => {
                return self.drop_goal(gi, t, &e.to_string(), events::PLANNER_FAILURE, extra)
            }
            Err(e) => return self.drop_goal(gi, t, &e.to_string(), events::PLANNER_ERROR, extra),
        };
        let mut plan = match from_time_triggered(&tt, self.library.next_id(), &g.goal, &self.model) {
            Ok(p) => p,
            Err(e) => return self.drop_goal(gi, t, &e.to_string(), events::PLANNER_ERROR, extra),
        };
        plan.context = self.replan_context();
        if g.rejected.iter().filter_map(|id| self.library.get(id)).any(|p| p.root == plan.root) {
            let msg = "planner returned a plan already refused by the scheduler";
            return self.drop_goal(gi, t, msg, events::PLANNER_FAILURE, extra);
        }
        let plan_id = match self.library.insert(plan.clone()) {
            Ok(id) => id,
            Err(e) => return self.drop_goal(gi, t, &e.to_string(), events::PLANNER_ERROR, extra),
        };
        plan.id = plan_id.clone();
        let ids = self.instantiate(plan, gi, t);
        format!(
            "new plan {plan_id} generated, {} activated based on new plan {plan_id}{}",
            ids.join(", "),
            self.dispatch_note(&ids)
        )
    }

    fn drop_goal(&mut self, gi: usize, t: Tick, why: &str, event: &str, extra: &mut Vec<LogEvent>) -> String {
        let id = self.goals[gi].id.clone();
        self.goals[gi].status = GoalStatus::Dropped;
        extra.push(LogEvent::new(t, event, format!("{id}: {why}")));
        extra.push(LogEvent::new(t, events::GOAL_DROPPED, format!("goal {id} dropped")));
        format!("goal {id} dropped")
    }

    /// Parents whose sub-goal was dropped lose their intention.
    fn fail_orphaned_parents(&mut self, t: Tick, env: &mut dyn Environment, extra: &mut Vec<LogEvent>) {
        let dropped: Vec<String> = self
            .goals
            .iter()
            .filter(|g| g.status == GoalStatus::Dropped && g.parent.is_some())
            .map(|g| g.id.clone())
            .collect();
        for id in dropped {
            self.settle_goal(&id, t, env, extra);
        }
    }

    fn replan_context(&self) -> Formula {
        Formula::and(
            self.config
                .replan_on
                .iter()
                .filter_map(|s| self.beliefs.get(s).map(|v| Formula::eq(s.as_str(), v.clone()))),
        )
    }

    /// Creates the intentions carrying `plan`: one, or one per robot in
    /// coordinator mode.
    fn instantiate(&mut self, plan: Plan, gi: usize, t: Tick) -> Vec<String> {
        let base = format!("I{}", self.next_intention);
        self.next_intention += 1;
        let goal = self.goals[gi].clone();
        self.goals[gi].status = GoalStatus::Pursued;
        let mut made = Vec::new();
        if self.config.coordinator {
            if let Ok(tt) = plan.to_time_triggered(&self.model) {
                for a in coordinator_dispatch(&tt) {
                    let Ok(mut sub) = from_time_triggered(&a.plan, plan.id.clone(), &goal.goal, &self.model) else {
                        continue;
                    };
                    sub.context = plan.context.clone();
                    let mut int = Intention::new(format!("{base}.{}", a.robot), sub, goal.id.clone(), t);
                    int.robot = Some(a.robot.clone());
                    made.push(int);
                }
            }
        }
        if made.is_empty() {
            made.push(Intention::new(base, plan, goal.id.clone(), t));
        }
        let ids = made.iter().map(|i| i.id.clone()).collect();
        self.intentions.extend(made);
        ids
    }

    /// ", dispatching C1 to R1, C2 to R2" for per-robot intentions.
    fn dispatch_note(&self, ids: &[String]) -> String {
        let mut pairs = Vec::new();
        for id in ids {
            let Some(int) = self.intentions.iter().find(|i| &i.id == id) else { continue };
            let Some(robot) = &int.robot else { continue };
            let Ok(tt) = int.plan.to_time_triggered(&self.model) else { continue };
            for a in coordinator_dispatch(&tt) {
                if a.resources.is_empty() {
                    pairs.push(format!("{robot} to no resource"));
                } else {
                    pairs.push(format!("{robot} to {}", a.resources.join("+")));
                }
            }
        }
        if pairs.is_empty() {
            String::new()
        } else {
            format!(", dispatching {}", pairs.join(", "))
        }
    }

    /// `[0] C1 move_up; [10] C1 move_right; [20] C1 move_right, ...`
    fn preview(&self, plan: &Plan) -> String {
        let Ok(sched) = plan.schedule(&self.model) else { return String::new() };
        let name = |a: &str| self.model.action(a).map_or_else(|| a.to_string(), |s| s.name.clone());
        let mut shown: Vec<String> =
            sched.iter().map(|s| format!("[{}] {} {}", s.start, s.atomic.actor, name(&s.atomic.action))).collect();
        if shown.is_empty() {
            plan.root.walk(&mut |_, node| {
                if let PlanNode::SubGoal(spec) = node {
                    shown.push(format!("sub-goal \"{}\"", spec.description));
                }
            });
        }
        let total = shown.len();
        shown.truncate(3);
        let mut text = shown.join("; ");
        if total > 3 {
            text.push_str(", ...");
        }
        text
    }

    /// `I2(P2 step4: C1 gather_resource & C2 deposit_resource)`.
    pub fn progress_summary(&self) -> String {
        let parts: Vec<String> = self
            .intentions
            .iter()
            .filter(|i| i.is_live())
            .map(|i| {
                let step = if i.steps > 1 { format!(" step{}", i.steps) } else { String::new() };
                let doing = match i.status {
                    IntentionStatus::Scheduled => "not admitted".to_string(),
                    _ if i.running.is_empty() => match self
                        .goals
                        .iter()
                        .find(|g| g.status.is_open() && g.parent.as_ref().is_some_and(|l| l.intention == i.id))
                    {
                        Some(g) => format!("waiting on sub-goal {}", g.id),
                        None => "waiting".to_string(),
                    },
                    _ => i.running_summary(),
                };
                format!("{}({}{step}: {doing})", i.id, i.plan.id)
            })
            .collect();
        if parts.is_empty() {
            "no intentions".into()
        } else {
            parts.join("; ")
        }
    }

    /// All goals closed and no desire left that could still activate.
    pub fn is_settled(&self) -> bool {
        self.goals.iter().all(|g| !g.status.is_open()) && self.intentions.iter().all(|i| !i.is_live())
    }
}
