use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Job, RtTask};
use crate::model::Tick;
use crate::rational::{self, Rational};

/// Constant bandwidth server for aperiodic system work.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CbsServer {
    pub id: String,
    #[serde(with = "rational::serde_text")]
    pub budget: Rational,
    pub period: Tick,
    #[serde(with = "rational::serde_text")]
    pub current_budget: Rational,
    pub server_deadline: Tick,
    pub backlog: VecDeque<Job>,
}

impl CbsServer {
    pub fn new(id: impl Into<String>, budget: Rational, period: Tick) -> Self {
        CbsServer {
            id: id.into(),
            budget,
            period,
            current_budget: budget,
            server_deadline: period,
            backlog: VecDeque::new(),
        }
    }

    /// Q = 1/10 every 10 ticks.
    pub fn system() -> Self {
        CbsServer::new("cbs", Rational::new(1, 10), 10)
    }

    pub fn bandwidth(&self) -> Rational {
        self.budget / Rational::from_integer(self.period as i64)
    }

    /// Enqueues a job. An idle server whose remaining budget cannot be
    /// consumed before its deadline at the server bandwidth gets a fresh
    /// deadline and budget.
    pub fn submit(&mut self, job: Job, t: Tick) {
        if self.backlog.is_empty() {
            let left = Rational::from_integer(self.server_deadline.saturating_sub(t) as i64);
            if self.server_deadline <= t || self.current_budget >= left * self.bandwidth() {
                self.server_deadline = t + self.period;
                self.current_budget = self.budget;
            }
        }
        self.backlog.push_back(job);
    }
}

/// Shares granted in one tick.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: Tick,
    /// (job id, share), in dispatch order.
    pub shares: Vec<(String, Rational)>,
    pub completed: Vec<String>,
    pub misses: Vec<String>,
}

impl TickRecord {
    pub fn load(&self) -> Rational {
        self.shares.iter().map(|(_, s)| *s).sum()
    }
}

enum Slot {
    Direct(usize),
    Server(usize),
}

/// Dispatches one tick. Released jobs are served in order of absolute
/// deadline (server backlog heads use the server deadline), ties by task
/// id; each job gets at most its rate and the total stays within `u`.
/// Finished jobs are removed; unfinished direct jobs whose deadline is
/// `t + 1` are reported as misses and dropped.
pub fn edf_dispatch(jobs: &mut Vec<Job>, servers: &mut [CbsServer], u: Rational, t: Tick) -> TickRecord {
    let zero = Rational::from_integer(0);
    let mut order: Vec<(Tick, String, Tick, Slot)> = Vec::new();
    for (i, j) in jobs.iter().enumerate() {
        if j.release <= t && j.remaining > zero {
            order.push((j.absolute_deadline, j.task_id.clone(), j.release, Slot::Direct(i)));
        }
    }
    for (i, s) in servers.iter().enumerate() {
        if let Some(j) = s.backlog.front() {
            if j.release <= t {
                order.push((s.server_deadline, j.task_id.clone(), j.release, Slot::Server(i)));
            }
        }
    }
    order.sort_by(|a, b| (a.0, &a.1, a.2).cmp(&(b.0, &b.1, b.2)));

    let mut rec = TickRecord { tick: t, ..Default::default() };
    let mut avail = u;
    for (_, _, _, slot) in order {
        if avail <= zero {
            break;
        }
        match slot {
            Slot::Direct(i) => {
                let j = &mut jobs[i];
                let share = j.rate.min(j.remaining).min(avail);
                j.remaining -= share;
                avail -= share;
                rec.shares.push((j.id(), share));
            }
            Slot::Server(i) => {
                let s = &mut servers[i];
                let bw = s.bandwidth();
                let j = s.backlog.front_mut().unwrap();
                let share = j.rate.min(bw).min(j.remaining).min(s.current_budget).min(avail);
                if share <= zero {
                    continue;
                }
                j.remaining -= share;
                avail -= share;
                rec.shares.push((j.id(), share));
                s.current_budget -= share;
                if j.remaining == zero {
                    rec.completed.push(j.id());
                    s.backlog.pop_front();
                }
                if s.current_budget == zero {
                    s.server_deadline += s.period;
                    s.current_budget = s.budget;
                }
            }
        }
    }
    jobs.retain(|j| {
        if j.release > t {
            return true;
        }
        if j.remaining == zero {
            rec.completed.push(j.id());
            false
        } else if j.absolute_deadline <= t + 1 {
            rec.misses.push(j.id());
            false
        } else {
            true
        }
    });
    rec
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleTrace {
    pub records: Vec<TickRecord>,
}

impl ScheduleTrace {
    pub fn misses(&self) -> impl Iterator<Item = (Tick, &String)> {
        self.records.iter().flat_map(|r| r.misses.iter().map(move |m| (r.tick, m)))
    }

    pub fn max_load(&self) -> Rational {
        self.records.iter().map(|r| r.load()).max().unwrap_or_else(|| Rational::from_integer(0))
    }

    /// `tick,job,share,cumulative`, where cumulative is the running total
    /// within the tick.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tick,job,share,cumulative\n");
        for r in &self.records {
            let mut cum = Rational::from_integer(0);
            for (job, share) in &r.shares {
                cum += *share;
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    r.tick,
                    job,
                    rational::format_rational(share),
                    rational::format_rational(&cum)
                );
            }
        }
        out
    }
}

/// Runs every job of `tasks` to completion (or miss) from the earliest
/// release, without servers.
pub fn simulate(tasks: &[RtTask], u: Rational) -> ScheduleTrace {
    let mut jobs: Vec<Job> = tasks.iter().flat_map(|t| t.jobs()).collect();
    let Some(start) = jobs.iter().map(|j| j.release).min() else {
        return ScheduleTrace::default();
    };
    let end = jobs.iter().map(|j| j.absolute_deadline).max().unwrap();
    let mut trace = ScheduleTrace::default();
    for t in start..end {
        if jobs.is_empty() {
            break;
        }
        trace.records.push(edf_dispatch(&mut jobs, &mut [], u, t));
    }
    trace
}

/// Stateful dispatcher owned by the execution layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scheduler {
    #[serde(with = "rational::serde_text")]
    pub capacity: Rational,
    pub server: CbsServer,
    tasks: BTreeMap<String, RtTask>,
    jobs: Vec<Job>,
    pub trace: ScheduleTrace,
}

impl Scheduler {
    pub fn new(capacity: Rational, server: CbsServer) -> Self {
        Scheduler { capacity, server, tasks: BTreeMap::new(), jobs: Vec::new(), trace: ScheduleTrace::default() }
    }

    /// Capacity left for intention tasks once the server is reserved.
    pub fn intention_capacity(&self) -> Rational {
        self.capacity - self.server.bandwidth()
    }

    pub fn add_task(&mut self, task: RtTask) {
        self.jobs.extend(task.jobs());
        self.tasks.insert(task.id.clone(), task);
    }

    /// Routes aperiodic system work through the CBS server.
    pub fn submit_aperiodic(&mut self, task: RtTask, t: Tick) {
        for j in task.jobs() {
            self.server.submit(j, t);
        }
    }

    /// Drops the tasks of one origin (for example an aborted action).
    pub fn cancel_origin(&mut self, origin: &str) {
        let ids: Vec<String> = self.tasks.values().filter(|t| t.origin == origin).map(|t| t.id.clone()).collect();
        for id in &ids {
            self.tasks.remove(id);
        }
        self.jobs.retain(|j| !ids.contains(&j.task_id));
    }

    /// Drops every task whose origin starts with `prefix`.
    pub fn cancel_prefix(&mut self, prefix: &str) {
        let origins: Vec<String> =
            self.tasks.values().filter(|t| t.origin.starts_with(prefix)).map(|t| t.origin.clone()).collect();
        for o in origins {
            self.cancel_origin(&o);
        }
    }

    /// Tasks still holding a reservation at or after `t`.
    pub fn reservations(&self, t: Tick) -> Vec<RtTask> {
        self.tasks.values().filter(|task| task.end_tick() > t).cloned().collect()
    }

    pub fn step(&mut self, t: Tick) -> &TickRecord {
        let rec = edf_dispatch(&mut self.jobs, std::slice::from_mut(&mut self.server), self.capacity, t);
        self.tasks.retain(|_, task| task.end_tick() > t + 1);
        self.trace.records.push(rec);
        self.trace.records.last().unwrap()
    }
}
