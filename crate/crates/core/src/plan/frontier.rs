//! Execution frontier over a plan tree: which leaves may start now.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{path_text, AtomicPlan, NodePath, Plan, PlanNode, SubGoalSpec};
use crate::model::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeState {
    Pending,
    Running { since: Tick },
    Done { at: Tick },
    Aborted,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrontierError {
    #[error("node {0} does not exist")]
    NoSuchNode(String),
    #[error("node {0} is not running")]
    NotRunning(String),
    #[error("node {0} is not ready")]
    NotReady(String),
}

/// A leaf whose activation time has been reached.
#[derive(Debug, Clone, PartialEq)]
pub enum Ready {
    Atomic { path: NodePath, atomic: AtomicPlan },
    SubGoal { path: NodePath, spec: SubGoalSpec },
}

impl Ready {
    pub fn path(&self) -> &NodePath {
        match self {
            Ready::Atomic { path, .. } | Ready::SubGoal { path, .. } => path,
        }
    }

    fn sort_key(&self) -> (&str, &NodePath) {
        match self {
            Ready::Atomic { path, atomic } => (atomic.actor.as_str(), path),
            Ready::SubGoal { path, .. } => ("", path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    states: BTreeMap<NodePath, NodeState>,
    /// Absolute tick at which each node became eligible (for atomics,
    /// before adding their own start offset).
    activated: BTreeMap<NodePath, Tick>,
}

impl Frontier {
    /// All nodes pending; the root is activated at `now`.
    pub fn new(plan: &Plan, now: Tick) -> Frontier {
        let mut states = BTreeMap::new();
        plan.root.walk(&mut |p, _| {
            states.insert(p.clone(), NodeState::Pending);
        });
        let mut f = Frontier { states, activated: BTreeMap::new() };
        f.activate(&plan.root, Vec::new(), now);
        f
    }

    pub fn state(&self, path: &[usize]) -> Option<NodeState> {
        self.states.get(path).copied()
    }

    pub fn activated_at(&self, path: &[usize]) -> Option<Tick> {
        self.activated.get(path).copied()
    }

    pub fn is_done(&self) -> bool {
        matches!(self.states.get(&Vec::new()), Some(NodeState::Done { .. }))
    }

    pub fn is_aborted(&self) -> bool {
        matches!(self.states.get(&Vec::new()), Some(NodeState::Aborted))
    }

    /// Paths of running leaves.
    pub fn running_leaves<'a>(&'a self, plan: &'a Plan) -> impl Iterator<Item = (&'a NodePath, Tick)> + 'a {
        self.states.iter().filter_map(move |(p, s)| match s {
            NodeState::Running { since } if plan.root.at(p).is_some_and(|n| n.children_len() == 0) => Some((p, *since)),
            _ => None,
        })
    }

    fn activate(&mut self, node: &PlanNode, path: NodePath, at: Tick) {
        match node {
            PlanNode::Sequential(c) => {
                self.states.insert(path.clone(), NodeState::Running { since: at });
                if !c.is_empty() {
                    let mut p = path.clone();
                    p.push(0);
                    self.activate(&c[0], p, at);
                }
            }
            PlanNode::Parallel(b) => {
                self.states.insert(path.clone(), NodeState::Running { since: at });
                for (i, br) in b.iter().enumerate() {
                    let mut p = path.clone();
                    p.push(i);
                    self.activate(&br.node, p, at + br.delay);
                }
            }
            _ => {}
        }
        self.activated.insert(path, at);
    }

    /// Marks a leaf as started. It must be ready at `now`.
    pub fn start(&mut self, plan: &Plan, path: &[usize], now: Tick) -> Result<(), FrontierError> {
        if !self.ready(plan, now).iter().any(|r| r.path().as_slice() == path) {
            return Err(FrontierError::NotReady(path_text(path)));
        }
        self.states.insert(path.to_vec(), NodeState::Running { since: now });
        Ok(())
    }

    /// Leaves that are pending with their activation time reached,
    /// ordered by (actor, path).
    pub fn ready(&self, plan: &Plan, now: Tick) -> Vec<Ready> {
        let mut out = Vec::new();
        for (path, &at) in &self.activated {
            if self.states.get(path) != Some(&NodeState::Pending) {
                continue;
            }
            match plan.root.at(path) {
                Some(PlanNode::Atomic(a)) if at + a.start <= now => {
                    out.push(Ready::Atomic { path: path.clone(), atomic: a.clone() })
                }
                Some(PlanNode::SubGoal(s)) if at <= now => {
                    out.push(Ready::SubGoal { path: path.clone(), spec: s.clone() })
                }
                _ => {}
            }
        }
        out.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        out
    }

    /// Marks a running leaf as done at `now` and propagates completion
    /// upwards, activating sequential successors.
    pub fn complete(&mut self, plan: &Plan, path: &[usize], now: Tick) -> Result<(), FrontierError> {
        match self.states.get(path) {
            None => return Err(FrontierError::NoSuchNode(path_text(path))),
            Some(NodeState::Running { .. }) if plan.root.at(path).is_some_and(|n| n.children_len() == 0) => {}
            Some(_) => return Err(FrontierError::NotRunning(path_text(path))),
        }
        self.states.insert(path.to_vec(), NodeState::Done { at: now });
        let mut child = path.to_vec();
        while let Some(idx) = child.pop() {
            let parent_path = child.clone();
            if self.states.get(&parent_path) == Some(&NodeState::Aborted) {
                break;
            }
            let parent = plan.root.at(&parent_path).expect("parent exists");
            let finished = match parent {
                PlanNode::Sequential(c) => {
                    if idx + 1 < c.len() {
                        let mut next = parent_path.clone();
                        next.push(idx + 1);
                        if self.states.get(&next) == Some(&NodeState::Pending) {
                            self.activate(&c[idx + 1], next, now);
                        }
                        false
                    } else {
                        true
                    }
                }
                PlanNode::Parallel(b) => (0..b.len()).all(|i| {
                    let mut p = parent_path.clone();
                    p.push(i);
                    matches!(self.states.get(&p), Some(NodeState::Done { .. }))
                }),
                _ => unreachable!("leaves have no children"),
            };
            if !finished {
                break;
            }
            self.states.insert(parent_path, NodeState::Done { at: now });
        }
        Ok(())
    }

    /// Aborts a node, its unfinished descendants and its sequential
    /// successors. Returns the paths of leaves that were running.
    pub fn abort(&mut self, plan: &Plan, path: &[usize]) -> Result<Vec<NodePath>, FrontierError> {
        let node = plan.root.at(path).ok_or_else(|| FrontierError::NoSuchNode(path_text(path)))?;
        let mut killed = Vec::new();
        self.abort_subtree(node, path.to_vec(), &mut killed);
        let mut p = path.to_vec();
        while let Some(idx) = p.pop() {
            if let Some(PlanNode::Sequential(c)) = plan.root.at(&p) {
                for (j, succ) in c.iter().enumerate().skip(idx + 1) {
                    let mut sp = p.clone();
                    sp.push(j);
                    self.abort_subtree(succ, sp, &mut killed);
                }
            }
        }
        killed.sort();
        Ok(killed)
    }

    fn abort_subtree(&mut self, node: &PlanNode, path: NodePath, killed: &mut Vec<NodePath>) {
        for i in 0..node.children_len() {
            let mut p = path.clone();
            p.push(i);
            self.abort_subtree(node.child(i).unwrap(), p, killed);
        }
        match self.states.get(&path) {
            Some(NodeState::Done { .. }) | Some(NodeState::Aborted) | None => {}
            Some(NodeState::Running { .. }) => {
                if node.children_len() == 0 {
                    killed.push(path.clone());
                }
                self.states.insert(path, NodeState::Aborted);
            }
            Some(NodeState::Pending) => {
                self.states.insert(path, NodeState::Aborted);
            }
        }
    }

    /// Aborts the whole plan.
    pub fn abort_all(&mut self, plan: &Plan) -> Vec<NodePath> {
        self.abort(plan, &[]).unwrap_or_default()
    }
}

/// Applies completions at `now` and returns the updated frontier along
/// with the leaves that are ready to start.
pub fn advance_frontier(
    plan: &Plan,
    frontier: &Frontier,
    now: Tick,
    completed: &[NodePath],
) -> Result<(Frontier, Vec<Ready>), FrontierError> {
    let mut f = frontier.clone();
    for p in completed {
        f.complete(plan, p, now)?;
    }
    let ready = f.ready(plan, now);
    Ok((f, ready))
}
