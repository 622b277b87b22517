//! A* over joint timed states of the grid domain.
//!
//! Decisions are taken at happenings (completions). An idle robot may
//! start an applicable action or wait for the next completion. Samples
//! are claimed when a gather starts, which matches the environment's
//! re-check of `remaining >= 1` at completion. The cost is lexicographic:
//! makespan, then total busy time, then the sum of start times.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use crate::grid::{Direction, GridAction};
use crate::model::{evaluate, Cell, CmpOp, Formula, Model, Term, Tick, Valuation, Value};
use crate::plan::{TimeTriggeredPlan, TtEntry};

use super::{PlannerError, PlanningProblem};

#[derive(Debug, Clone)]
pub struct BuiltinPlanner {
    /// Search gives up after expanding this many nodes.
    pub max_expansions: usize,
}

impl Default for BuiltinPlanner {
    fn default() -> Self {
        BuiltinPlanner { max_expansions: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub expanded: usize,
    pub generated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Act {
    Move(Direction),
    Gather(u8),
    Deposit,
    Recharge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct RobotState {
    pos: Cell,
    battery: i64,
    carried: i64,
    ok: bool,
    busy: Option<(Act, Tick)>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct JointState {
    t: Tick,
    robots: Vec<RobotState>,
    remaining: Vec<i64>,
    stored: i64,
}

#[derive(Debug, Clone, Copy)]
struct Durations {
    moves: Tick,
    gather: Tick,
    deposit: Tick,
    recharge: Tick,
}

/// Static facts about the instance extracted from the model.
struct Grid {
    width: i32,
    height: i32,
    blocked: Vec<bool>,
    robots: Vec<String>,
    durations: Vec<Durations>,
    battery_cap: Vec<i64>,
    resources: Vec<(String, Cell)>,
    warehouse: Option<Cell>,
    stations: Vec<Cell>,
    fixed: BTreeMap<String, Value>,
}

fn loc_constant(f: &Formula, symbol: &str) -> Option<Cell> {
    let mut found = None;
    f.walk_cmp(&mut |l, op, r| {
        if let (Term::Sym(s), CmpOp::Eq, Term::Const(Value::Loc(c))) = (l, op, r) {
            if s == symbol {
                found = Some(*c);
            }
        }
    });
    found
}

impl Grid {
    fn extract(problem: &PlanningProblem) -> Result<Grid, PlannerError> {
        let model: &Model = problem.model;
        let (width, height) =
            model.location_bounds.ok_or_else(|| PlannerError::Unsupported("model has no location bounds".into()))?;
        let mut robots = problem.actors.clone();
        robots.sort();
        robots.dedup();
        if robots.len() > u8::MAX as usize {
            return Err(PlannerError::Unsupported("too many robots".into()));
        }
        let mut durations: BTreeMap<&str, [Option<Tick>; 4]> = BTreeMap::new();
        let mut resources: BTreeMap<String, Cell> = BTreeMap::new();
        let mut warehouse = None;
        let mut stations = Vec::new();
        for a in &model.actions {
            let ga = GridAction::parse(a)
                .ok_or_else(|| PlannerError::Unsupported(format!("`{}` is not a grid action", a.id())))?;
            let at_sym = format!("at({})", ga.robot());
            let kind = match &ga {
                GridAction::Move { .. } => 0,
                GridAction::Gather { resource, .. } => {
                    let c = loc_constant(&a.pre, &at_sym)
                        .ok_or_else(|| PlannerError::Unsupported(format!("cannot locate {resource}")))?;
                    resources.insert(resource.clone(), c);
                    1
                }
                GridAction::Deposit { .. } => {
                    warehouse = loc_constant(&a.pre, &at_sym);
                    2
                }
                GridAction::Recharge { station, .. } => {
                    if !stations.contains(station) {
                        stations.push(*station);
                    }
                    3
                }
            };
            let slot = &mut durations.entry(a.actor.as_str()).or_insert([None; 4])[kind];
            match slot {
                None => *slot = Some(a.duration),
                Some(d) if *d != a.duration => {
                    return Err(PlannerError::Unsupported(format!("durations of {} vary", a.name)))
                }
                _ => {}
            }
        }
        stations.sort();
        let mut ds = Vec::new();
        let mut caps = Vec::new();
        for r in &robots {
            let d = durations.get(r.as_str()).copied().unwrap_or([None; 4]);
            ds.push(Durations {
                moves: d[0].unwrap_or(1),
                gather: d[1].unwrap_or(1),
                deposit: d[2].unwrap_or(1),
                recharge: d[3].unwrap_or(1),
            });
            let cap = match model.symbol(&format!("battery({r})")).map(|s| &s.kind) {
                Some(crate::model::SymbolKind::Integer { range }) => range.1,
                _ => i64::MAX,
            };
            caps.push(cap);
        }
        let mut blocked = vec![false; (width * height).max(0) as usize];
        for y in 0..height {
            for x in 0..width {
                let c = Cell::new(x, y);
                blocked[(y * width + x) as usize] =
                    matches!(problem.initial.get(&format!("blocked({})", c.object_name())), Some(Value::Bool(true)));
            }
        }
        let mut fixed = problem.initial.values.clone();
        for r in &robots {
            for f in ["at", "battery", "carrying", "ok"] {
                fixed.remove(&format!("{f}({r})"));
            }
        }
        for res in resources.keys() {
            fixed.remove(&format!("remaining({res})"));
        }
        fixed.remove("stored");
        Ok(Grid {
            width,
            height,
            blocked,
            robots,
            durations: ds,
            battery_cap: caps,
            resources: resources.into_iter().collect(),
            warehouse,
            stations,
            fixed,
        })
    }

    fn free(&self, c: Cell) -> bool {
        c.x >= 0
            && c.y >= 0
            && c.x < self.width
            && c.y < self.height
            && !self.blocked[(c.y * self.width + c.x) as usize]
    }

    fn initial(&self, problem: &PlanningProblem) -> Result<JointState, PlannerError> {
        let b = &problem.initial;
        let missing = |s: &str| PlannerError::Unsupported(format!("belief set lacks `{s}`"));
        let mut robots = Vec::new();
        for r in &self.robots {
            let at = format!("at({r})");
            let pos = b.get(&at).and_then(Value::as_cell).ok_or_else(|| missing(&at))?;
            if pos == Cell::NOWHERE {
                return Err(PlannerError::Unsupported(format!("robot {r} is not in the scene")));
            }
            robots.push(RobotState {
                pos,
                battery: b.int(&format!("battery({r})")).unwrap_or(0),
                carried: b.int(&format!("carrying({r})")).unwrap_or(0),
                ok: matches!(b.get(&format!("ok({r})")), Some(Value::Bool(true))),
                busy: None,
            });
        }
        Ok(JointState {
            t: 0,
            robots,
            remaining: self.resources.iter().map(|(id, _)| b.int(&format!("remaining({id})")).unwrap_or(0)).collect(),
            stored: b.int("stored").unwrap_or(0),
        })
    }

    fn duration(&self, r: usize, a: Act) -> Tick {
        let d = &self.durations[r];
        match a {
            Act::Move(_) => d.moves,
            Act::Gather(_) => d.gather,
            Act::Deposit => d.deposit,
            Act::Recharge => d.recharge,
        }
    }

    fn applicable(&self, s: &JointState, r: usize) -> Vec<Act> {
        let rs = &s.robots[r];
        let mut out = Vec::new();
        if rs.battery >= 1 {
            for d in Direction::ALL {
                if self.free(d.apply(rs.pos)) {
                    out.push(Act::Move(d));
                }
            }
        }
        for (i, (_, c)) in self.resources.iter().enumerate() {
            if *c == rs.pos && s.remaining[i] >= 1 {
                out.push(Act::Gather(i as u8));
            }
        }
        if Some(rs.pos) == self.warehouse && rs.carried >= 1 {
            out.push(Act::Deposit);
        }
        if self.stations.contains(&rs.pos) && rs.battery < self.battery_cap[r] {
            out.push(Act::Recharge);
        }
        out
    }

    fn finish(&self, s: &mut JointState, r: usize) {
        let rs = &mut s.robots[r];
        let Some((a, _)) = rs.busy.take() else { return };
        rs.ok = true;
        match a {
            Act::Move(d) => {
                rs.pos = d.apply(rs.pos);
                rs.battery -= 1;
            }
            Act::Gather(_) => rs.carried += 1,
            Act::Deposit => {
                rs.carried -= 1;
                s.stored += 1;
            }
            Act::Recharge => rs.battery = self.battery_cap[r],
        }
    }

    fn to_grid_action(&self, r: usize, pos: Cell, a: Act) -> GridAction {
        let robot = self.robots[r].clone();
        match a {
            Act::Move(dir) => GridAction::Move { robot, dir, from: pos },
            Act::Gather(i) => GridAction::Gather { robot, resource: self.resources[i as usize].0.clone() },
            Act::Deposit => GridAction::Deposit { robot },
            Act::Recharge => GridAction::Recharge { robot, station: pos },
        }
    }
}

struct View<'a> {
    grid: &'a Grid,
    state: &'a JointState,
}

impl Valuation for View<'_> {
    fn value_of(&self, symbol: &str) -> Option<Value> {
        if let Some(v) = self.grid.fixed.get(symbol) {
            return Some(v.clone());
        }
        if symbol == "stored" {
            return Some(Value::Int(self.state.stored));
        }
        let (f, arg) = symbol.strip_suffix(')')?.split_once('(')?;
        if f == "remaining" {
            let i = self.grid.resources.iter().position(|(id, _)| id == arg)?;
            return Some(Value::Int(self.state.remaining[i]));
        }
        let r = self.grid.robots.iter().position(|id| id == arg)?;
        let rs = &self.state.robots[r];
        Some(match f {
            "at" => Value::Loc(rs.pos),
            "battery" => Value::Int(rs.battery),
            "carrying" => Value::Int(rs.carried),
            "ok" => Value::Bool(rs.ok),
            _ => return None,
        })
    }
}

/// Goal conjuncts the heuristic understands.
enum Need {
    Remaining { res: usize, max: i64 },
    Stored { min: i64 },
    At { robot: usize, cell: Cell },
}

fn compile_needs(goal: &Formula, grid: &Grid) -> Vec<Need> {
    let parts = match goal.canonicalized() {
        Formula::And(fs) => fs,
        f => vec![f],
    };
    let mut out = Vec::new();
    for p in parts {
        let Formula::Cmp(l, op, r) = p else { continue };
        let (sym, op, val) = match (l, r) {
            (Term::Sym(s), Term::Const(v)) => (s, op, v),
            (Term::Const(v), Term::Sym(s)) => {
                let flipped = match op {
                    CmpOp::Lt => CmpOp::Gt,
                    CmpOp::Le => CmpOp::Ge,
                    CmpOp::Gt => CmpOp::Lt,
                    CmpOp::Ge => CmpOp::Le,
                    o => o,
                };
                (s, flipped, v)
            }
            _ => continue,
        };
        let Some((f, arg)) = sym.strip_suffix(')').and_then(|s| s.split_once('(')).or(Some((sym.as_str(), ""))) else {
            continue;
        };
        match (f, val) {
            ("remaining", Value::Int(k)) => {
                let max = match op {
                    CmpOp::Eq | CmpOp::Le => k,
                    CmpOp::Lt => k - 1,
                    _ => continue,
                };
                if let Some(res) = grid.resources.iter().position(|(id, _)| id == arg) {
                    out.push(Need::Remaining { res, max });
                }
            }
            ("stored", Value::Int(k)) => {
                let min = match op {
                    CmpOp::Eq | CmpOp::Ge => k,
                    CmpOp::Gt => k + 1,
                    _ => continue,
                };
                out.push(Need::Stored { min });
            }
            ("at", Value::Loc(cell)) if op == CmpOp::Eq => {
                if let Some(robot) = grid.robots.iter().position(|id| id == arg) {
                    out.push(Need::At { robot, cell });
                }
            }
            _ => {}
        }
    }
    out
}

const INF: Tick = Tick::MAX / 4;

fn dist(a: Cell, b: Cell) -> Tick {
    a.manhattan(b) as Tick
}

/// Lower bound on the tick at which the goal can hold with every robot idle.
fn lower_bound(grid: &Grid, needs: &[Need], s: &JointState) -> Tick {
    // Where and when each robot becomes available, and what it will carry.
    let avail: Vec<(Tick, Cell, i64)> = s
        .robots
        .iter()
        .map(|rs| match rs.busy {
            None => (s.t, rs.pos, rs.carried),
            Some((a, end)) => match a {
                Act::Move(d) => (end, d.apply(rs.pos), rs.carried),
                Act::Gather(_) => (end, rs.pos, rs.carried + 1),
                Act::Deposit => (end, rs.pos, rs.carried - 1),
                Act::Recharge => (end, rs.pos, rs.carried),
            },
        })
        .collect();
    let mut lb = avail.iter().map(|a| a.0).max().unwrap_or(s.t);
    let pending_deposits = s.robots.iter().filter(|r| matches!(r.busy, Some((Act::Deposit, _)))).count() as i64;
    let stored_proj = s.stored + pending_deposits;
    let carried_total: i64 = avail.iter().map(|a| a.2).sum();
    let remaining_total: i64 = s.remaining.iter().sum();
    // Earliest completion of a gather at `res` followed by a delivery.
    let fetch = |res: usize, deliver: bool| -> Tick {
        let cell = grid.resources[res].1;
        (0..grid.robots.len())
            .map(|r| {
                let d = grid.durations[r];
                let (t, p, _) = avail[r];
                let mut x = t + dist(p, cell) * d.moves + d.gather;
                if deliver {
                    match grid.warehouse {
                        Some(w) => x += dist(cell, w) * d.moves + d.deposit,
                        None => return INF,
                    }
                }
                x
            })
            .min()
            .unwrap_or(INF)
    };
    for n in needs {
        let b = match *n {
            Need::Remaining { res, max } if s.remaining[res] > max => fetch(res, false),
            Need::Stored { min } if stored_proj < min => {
                let deficit = min - stored_proj;
                let Some(w) = grid.warehouse else { return INF };
                let mut b = (0..grid.robots.len())
                    .map(|r| {
                        let d = grid.durations[r];
                        let (t, p, c) = avail[r];
                        if c >= 1 {
                            t + dist(p, w) * d.moves + d.deposit
                        } else {
                            (0..grid.resources.len())
                                .filter(|&i| s.remaining[i] > 0)
                                .map(|i| {
                                    let rc = grid.resources[i].1;
                                    t + (dist(p, rc) + dist(rc, w)) * d.moves + d.gather + d.deposit
                                })
                                .min()
                                .unwrap_or(INF)
                        }
                    })
                    .min()
                    .unwrap_or(INF);
                let k = grid.robots.len().max(1) as i64;
                let min_dep = grid.durations.iter().map(|d| d.deposit).min().unwrap_or(0);
                b = b.saturating_add(((deficit + k - 1) / k - 1).max(0) as Tick * min_dep);
                if deficit > carried_total {
                    // Some sample still on the ground must be fetched and delivered.
                    let any = (0..grid.resources.len()).filter(|&i| s.remaining[i] > 0).map(|i| fetch(i, true)).min();
                    b = b.max(any.unwrap_or(INF));
                }
                if deficit >= carried_total + remaining_total {
                    // Every sample on the ground is needed.
                    for i in (0..grid.resources.len()).filter(|&i| s.remaining[i] > 0) {
                        b = b.max(fetch(i, true));
                    }
                }
                b
            }
            Need::At { robot, cell } => {
                let (t, p, _) = avail[robot];
                t + dist(p, cell) * grid.durations[robot].moves
            }
            _ => 0,
        };
        lb = lb.max(b);
    }
    lb
}

type Cost = (Tick, Tick, Tick);

struct Node {
    state: JointState,
    parent: usize,
    started: Vec<(usize, Act, Cell)>,
    g: Cost,
}

impl BuiltinPlanner {
    pub fn plan(&self, problem: &PlanningProblem) -> Result<Option<TimeTriggeredPlan>, PlannerError> {
        self.plan_with_stats(problem).map(|(p, _)| p)
    }

    pub fn plan_with_stats(
        &self,
        problem: &PlanningProblem,
    ) -> Result<(Option<TimeTriggeredPlan>, SearchStats), PlannerError> {
        let grid = Grid::extract(problem)?;
        let start = grid.initial(problem)?;
        let needs = compile_needs(&problem.goal, &grid);
        let goal_holds = |s: &JointState| -> Result<bool, PlannerError> {
            evaluate(&problem.goal, &View { grid: &grid, state: s })
                .map_err(|e| PlannerError::Unsupported(e.to_string()))
        };
        let mut stats = SearchStats::default();
        if goal_holds(&start)? {
            return Ok((Some(TimeTriggeredPlan::default()), stats));
        }
        let mut nodes = vec![Node { state: start.clone(), parent: usize::MAX, started: vec![], g: (0, 0, 0) }];
        let mut best: HashMap<JointState, Cost> = HashMap::new();
        best.insert(start.clone(), (0, 0, 0));
        let mut open = BinaryHeap::new();
        let f0 = lower_bound(&grid, &needs, &start);
        if f0 > problem.deadline {
            return Ok((None, stats));
        }
        open.push(Reverse(((f0, 0, 0), start, 0usize)));

        while let Some(Reverse((_, state, idx))) = open.pop() {
            if best.get(&state).is_some_and(|b| *b < nodes[idx].g) {
                continue;
            }
            let all_idle = state.robots.iter().all(|r| r.busy.is_none());
            if all_idle && goal_holds(&state)? {
                return Ok((Some(self.extract(&grid, &nodes, idx)), stats));
            }
            stats.expanded += 1;
            if stats.expanded > self.max_expansions {
                return Ok((None, stats));
            }
            let idle: Vec<usize> = (0..state.robots.len()).filter(|&r| state.robots[r].busy.is_none()).collect();
            let options: Vec<Vec<Option<Act>>> = idle
                .iter()
                .map(|&r| {
                    let mut o: Vec<Option<Act>> = vec![None];
                    o.extend(grid.applicable(&state, r).into_iter().map(Some));
                    o
                })
                .collect();
            let mut choice = vec![0usize; idle.len()];
            loop {
                self.expand_choice(
                    &grid,
                    &needs,
                    problem.deadline,
                    &state,
                    idx,
                    &idle,
                    &options,
                    &choice,
                    &mut nodes,
                    &mut best,
                    &mut open,
                    &mut stats,
                );
                // Next combination (odometer).
                let mut k = 0;
                loop {
                    if k == choice.len() {
                        break;
                    }
                    choice[k] += 1;
                    if choice[k] < options[k].len() {
                        break;
                    }
                    choice[k] = 0;
                    k += 1;
                }
                if k == choice.len() {
                    break;
                }
            }
        }
        Ok((None, stats))
    }

    #[allow(clippy::too_many_arguments)]
    fn expand_choice(
        &self,
        grid: &Grid,
        needs: &[Need],
        deadline: Tick,
        state: &JointState,
        idx: usize,
        idle: &[usize],
        options: &[Vec<Option<Act>>],
        choice: &[usize],
        nodes: &mut Vec<Node>,
        best: &mut HashMap<JointState, Cost>,
        open: &mut BinaryHeap<Reverse<(Cost, JointState, usize)>>,
        stats: &mut SearchStats,
    ) {
        let mut next = state.clone();
        let (mut last_end, mut work, mut starts) = nodes[idx].g;
        let mut started = Vec::new();
        for (k, &r) in idle.iter().enumerate() {
            let Some(a) = options[k][choice[k]] else { continue };
            if let Act::Gather(i) = a {
                if next.remaining[i as usize] < 1 {
                    return;
                }
                next.remaining[i as usize] -= 1;
            }
            let d = grid.duration(r, a);
            next.robots[r].busy = Some((a, state.t + d));
            last_end = last_end.max(state.t + d);
            work += d;
            starts += state.t;
            started.push((r, a, state.robots[r].pos));
        }
        let Some(t_next) = next.robots.iter().filter_map(|r| r.busy.map(|b| b.1)).min() else {
            return;
        };
        next.t = t_next;
        for r in 0..next.robots.len() {
            if matches!(next.robots[r].busy, Some((_, e)) if e == t_next) {
                grid.finish(&mut next, r);
            }
        }
        let g = (last_end, work, starts);
        let h = lower_bound(grid, needs, &next).max(last_end);
        if h > deadline {
            return;
        }
        stats.generated += 1;
        if best.get(&next).is_some_and(|b| *b <= g) {
            return;
        }
        best.insert(next.clone(), g);
        nodes.push(Node { state: next.clone(), parent: idx, started, g });
        open.push(Reverse(((h, work, starts), next, nodes.len() - 1)));
    }

    fn extract(&self, grid: &Grid, nodes: &[Node], mut idx: usize) -> TimeTriggeredPlan {
        let mut entries = Vec::new();
        while idx != usize::MAX {
            let n = &nodes[idx];
            if n.parent != usize::MAX {
                let t = nodes[n.parent].state.t;
                for &(r, a, pos) in &n.started {
                    let ga = grid.to_grid_action(r, pos, a);
                    entries.push(TtEntry {
                        start: t,
                        action: ga.id(),
                        duration: grid.duration(r, a),
                        actor: grid.robots[r].clone(),
                    });
                }
            }
            idx = n.parent;
        }
        TimeTriggeredPlan::new(entries)
    }
}
