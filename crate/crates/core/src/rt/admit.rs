use serde::{Deserialize, Serialize};

use super::edf::simulate;
use super::{RtTask, TaskKind};
use crate::model::Tick;
use crate::rational::{format_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Admission {
    Accept,
    Reject {
        tick: Tick,
        /// Tasks competing at the violating tick.
        tasks: Vec<String>,
        reason: String,
    },
}

impl Admission {
    pub fn is_accept(&self) -> bool {
        matches!(self, Admission::Accept)
    }
}

/// Accepts iff (a) at every tick the rates of the periodic tasks whose
/// interval contains it sum to at most `u`, and (b) EDF over the combined
/// job set misses no deadline. A rejection reports the earliest violation.
pub fn admit(active: &[RtTask], candidate: &[RtTask], u: Rational) -> Admission {
    if candidate.is_empty() {
        return Admission::Accept;
    }
    let all: Vec<RtTask> = active.iter().chain(candidate).cloned().collect();
    let start = all.iter().map(|t| t.first_tick()).min().unwrap();
    let end = all.iter().map(|t| t.end_tick()).max().unwrap();

    let mut first: Option<(Tick, Vec<String>, String)> = None;
    // Rates only change at interval boundaries.
    let mut cuts: Vec<Tick> = all
        .iter()
        .filter(|t| matches!(t.kind, TaskKind::PeriodicInInterval { .. }))
        .flat_map(|t| [t.first_tick(), t.end_tick()])
        .filter(|&c| c >= start && c < end)
        .collect();
    cuts.sort_unstable();
    cuts.dedup();
    for t in cuts {
        let covering: Vec<&RtTask> = all.iter().filter(|task| task.covers(t)).collect();
        let load: Rational = covering.iter().map(|task| task.rate).sum();
        if load > u {
            first = Some((
                t,
                covering.iter().map(|task| task.id.clone()).collect(),
                format!(
                    "cumulative utilization {} exceeds capacity {} at tick {t}",
                    format_rational(&load),
                    format_rational(&u)
                ),
            ));
            break;
        }
    }

    let trace = simulate(&all, u);
    if let Some((t, job)) = trace.misses().next() {
        if first.as_ref().is_none_or(|(ft, _, _)| t < *ft) {
            let competing: Vec<String> = all
                .iter()
                .filter(|task| task.first_tick() <= t && t < task.end_tick())
                .map(|task| task.id.clone())
                .collect();
            first = Some((t, competing, format!("job {job} misses its deadline at tick {}", t + 1)));
        }
    }
    match first {
        None => Admission::Accept,
        Some((tick, mut tasks, reason)) => {
            tasks.sort();
            Admission::Reject { tick, tasks, reason }
        }
    }
}
