//! Adapter for an external temporal planner invoked as
//! `<command> <domain-file> <problem-file>`.

use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use super::{parse_plan_text, to_pddl, PlannerError, PlanningProblem};
use crate::plan::TimeTriggeredPlan;

static CALLS: AtomicUsize = AtomicUsize::new(0);

#[derive(Debug, Clone)]
pub struct ExternalPlanner {
    /// Program and leading arguments, split on whitespace.
    pub command: String,
    pub timeout: Duration,
    /// Where PDDL files are written; a temporary directory by default.
    pub workdir: Option<PathBuf>,
    pub ticks_per_unit: f64,
}

impl ExternalPlanner {
    pub fn new(command: impl Into<String>) -> Self {
        ExternalPlanner {
            command: command.into(),
            timeout: Duration::from_secs(60),
            workdir: None,
            ticks_per_unit: 1.0,
        }
    }

    /// Keeps the plan lines of a planner's stdout: those after the last
    /// `Solution Found` marker (if any) that start with a time stamp.
    pub fn plan_lines(stdout: &str) -> String {
        let tail = match stdout.rfind("Solution Found") {
            Some(i) => &stdout[i..],
            None => stdout,
        };
        tail.lines()
            .map(str::trim)
            .filter(|l| {
                l.split_once(':')
                    .is_some_and(|(t, rest)| !t.is_empty() && t.trim().parse::<f64>().is_ok() && rest.contains('('))
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn plan(&self, problem: &PlanningProblem) -> Result<Option<TimeTriggeredPlan>, PlannerError> {
        let (domain, prob) = to_pddl(problem).map_err(|e| PlannerError::Unsupported(e.to_string()))?;
        let dir = match &self.workdir {
            Some(d) => d.clone(),
            None => std::env::temp_dir().join(format!(
                "rtbdi-{}-{}",
                std::process::id(),
                CALLS.fetch_add(1, Ordering::Relaxed)
            )),
        };
        std::fs::create_dir_all(&dir).map_err(|e| PlannerError::Io(e.to_string()))?;
        let dpath = dir.join("domain.pddl");
        let ppath = dir.join("problem.pddl");
        std::fs::write(&dpath, domain).map_err(|e| PlannerError::Io(e.to_string()))?;
        std::fs::write(&ppath, prob).map_err(|e| PlannerError::Io(e.to_string()))?;

        let mut parts = self.command.split_whitespace();
        let program = parts.next().ok_or_else(|| PlannerError::Io("empty planner command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .arg(&dpath)
            .arg(&ppath)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| PlannerError::Io(format!("cannot start `{program}`: {e}")))?;
        let mut stdout = child.stdout.take().unwrap();
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stdout.read_to_string(&mut s);
            s
        });
        let started = Instant::now();
        loop {
            match child.try_wait().map_err(|e| PlannerError::Io(e.to_string()))? {
                Some(_) => break,
                None if started.elapsed() > self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    log::warn!("external planner timed out after {:?}", self.timeout);
                    return Ok(None);
                }
                None => std::thread::sleep(Duration::from_millis(10)),
            }
        }
        let out = reader.join().unwrap_or_default();
        let lines = Self::plan_lines(&out);
        if lines.is_empty() {
            return Ok(None);
        }
        parse_plan_text(&lines, problem.model, self.ticks_per_unit)
            .map(Some)
            .map_err(|e| PlannerError::BadOutput(e.to_string()))
    }
}
