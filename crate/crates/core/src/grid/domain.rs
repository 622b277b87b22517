//! Generation of the grid model: typed symbols and grounded actions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{GridWorld, WorldConfig};
use crate::model::{
    ActionSpec, Assignment, BeliefSet, Cell, CmpOp, EffectSet, Formula, Model, ModelError, SymbolDecl, SymbolKind,
    Value,
};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub duration: u64,
    #[serde(with = "rational::serde_text")]
    pub cost: Rational,
}

impl Timing {
    pub fn new(duration: u64, cost: Rational) -> Self {
        Timing { duration, cost }
    }
}

/// Durations and utilization costs of the four action kinds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainConfig {
    #[serde(rename = "move", default = "default_move")]
    pub move_: Timing,
    #[serde(default = "default_gather")]
    pub gather: Timing,
    #[serde(default = "default_deposit")]
    pub deposit: Timing,
    #[serde(default = "default_recharge")]
    pub recharge: Timing,
}

fn default_move() -> Timing {
    Timing::new(10, Rational::new(3, 10))
}
fn default_gather() -> Timing {
    Timing::new(20, Rational::new(3, 10))
}
fn default_deposit() -> Timing {
    Timing::new(10, Rational::new(3, 10))
}
fn default_recharge() -> Timing {
    Timing::new(20, Rational::new(1, 5))
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            move_: default_move(),
            gather: default_gather(),
            deposit: default_deposit(),
            recharge: default_recharge(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn name(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }

    /// y grows upwards.
    pub fn apply(self, c: Cell) -> Cell {
        match self {
            Direction::Up => Cell::new(c.x, c.y + 1),
            Direction::Down => Cell::new(c.x, c.y - 1),
            Direction::Left => Cell::new(c.x - 1, c.y),
            Direction::Right => Cell::new(c.x + 1, c.y),
        }
    }

    pub fn between(from: Cell, to: Cell) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| d.apply(from) == to)
    }
}

/// Structured view of a grounded grid action.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GridAction {
    Move { robot: String, dir: Direction, from: Cell },
    Gather { robot: String, resource: String },
    Deposit { robot: String },
    Recharge { robot: String, station: Cell },
}

fn parse_cell_name(s: &str) -> Option<Cell> {
    let (x, y) = s.strip_prefix('c')?.split_once('_')?;
    Some(Cell::new(x.parse().ok()?, y.parse().ok()?))
}

impl GridAction {
    pub fn robot(&self) -> &str {
        match self {
            GridAction::Move { robot, .. }
            | GridAction::Gather { robot, .. }
            | GridAction::Deposit { robot }
            | GridAction::Recharge { robot, .. } => robot,
        }
    }

    pub fn name(&self) -> String {
        match self {
            GridAction::Move { dir, .. } => format!("move_{}", dir.name()),
            GridAction::Gather { .. } => "gather_resource".into(),
            GridAction::Deposit { .. } => "deposit_resource".into(),
            GridAction::Recharge { .. } => "recharge".into(),
        }
    }

    pub fn args(&self) -> Vec<String> {
        match self {
            GridAction::Move { robot, from, .. } => vec![robot.clone(), from.object_name()],
            GridAction::Gather { robot, resource } => vec![robot.clone(), resource.clone()],
            GridAction::Deposit { robot } => vec![robot.clone()],
            GridAction::Recharge { robot, station } => vec![robot.clone(), station.object_name()],
        }
    }

    pub fn id(&self) -> String {
        format!("{}({})", self.name(), self.args().join(","))
    }

    pub fn parse(spec: &ActionSpec) -> Option<GridAction> {
        let robot = spec.args.first()?.clone();
        Some(match spec.name.as_str() {
            "gather_resource" => GridAction::Gather { robot, resource: spec.args.get(1)?.clone() },
            "deposit_resource" => GridAction::Deposit { robot },
            "recharge" => GridAction::Recharge { robot, station: parse_cell_name(spec.args.get(1)?)? },
            n => {
                let dir = Direction::ALL.into_iter().find(|d| n == format!("move_{}", d.name()))?;
                GridAction::Move { robot, dir, from: parse_cell_name(spec.args.get(1)?)? }
            }
        })
    }

    /// Parses an action id such as `move_up(C1,c0_0)`.
    pub fn parse_id(id: &str) -> Option<GridAction> {
        let (name, rest) = id.split_once('(')?;
        let args: Vec<String> = rest.strip_suffix(')')?.split(',').map(str::to_string).collect();
        let spec = ActionSpec {
            name: name.into(),
            args,
            actor: String::new(),
            pre: Formula::True,
            duration: 1,
            context: Formula::True,
            effects: EffectSet::default(),
            post: Formula::True,
            cost: Rational::from_integer(1),
        };
        GridAction::parse(&spec)
    }
}

fn at(r: &str) -> String {
    format!("at({r})")
}
fn battery(r: &str) -> String {
    format!("battery({r})")
}
fn carrying(r: &str) -> String {
    format!("carrying({r})")
}
fn ok(r: &str) -> String {
    format!("ok({r})")
}
fn remaining(res: &str) -> String {
    format!("remaining({res})")
}
fn blocked(c: Cell) -> String {
    format!("blocked({})", c.object_name())
}

/// Builds the model for a world. `robots` and `resources` list every id
/// that may ever appear (including spawned ones) with resource cells.
pub fn build_model(
    cfg: &WorldConfig,
    domain: &DomainConfig,
    robots: &[String],
    resources: &[(String, Cell)],
    total_samples: i64,
    capacity: Rational,
) -> Result<Model, ModelError> {
    let samples = (0, total_samples.max(1));
    let mut symbols = Vec::new();
    for r in robots {
        symbols.push(SymbolDecl::new(at(r), SymbolKind::Location));
        symbols.push(SymbolDecl::new(battery(r), SymbolKind::Integer { range: (0, cfg.battery_capacity) }));
        symbols.push(SymbolDecl::new(carrying(r), SymbolKind::Integer { range: samples }));
        symbols.push(SymbolDecl::new(ok(r), SymbolKind::Boolean));
    }
    for (res, _) in resources {
        symbols.push(SymbolDecl::new(remaining(res), SymbolKind::Integer { range: samples }));
    }
    symbols.push(SymbolDecl::new("stored", SymbolKind::Integer { range: samples }));
    symbols.push(SymbolDecl::new("robot_count", SymbolKind::Integer { range: (0, robots.len() as i64) }));
    for c in cfg.cells() {
        symbols.push(SymbolDecl::new(blocked(c), SymbolKind::Boolean));
    }

    let mut actions = Vec::new();
    let mk = |ga: GridAction, t: Timing, pre, context, effects, post| ActionSpec {
        name: ga.name(),
        args: ga.args(),
        actor: ga.robot().to_string(),
        pre,
        duration: t.duration,
        context,
        effects: EffectSet::new(effects),
        post,
        cost: t.cost,
    };
    for r in robots {
        for from in cfg.cells() {
            for dir in Direction::ALL {
                let to = dir.apply(from);
                if !cfg.in_bounds(to) {
                    continue;
                }
                let free = Formula::eq(blocked(to), Value::Bool(false));
                actions.push(mk(
                    GridAction::Move { robot: r.clone(), dir, from },
                    domain.move_,
                    Formula::and([
                        Formula::eq(at(r), Value::Loc(from)),
                        Formula::cmp(battery(r), CmpOp::Ge, Value::Int(1)),
                        free.clone(),
                    ]),
                    free,
                    vec![
                        Assignment::set(at(r), Value::Loc(to)),
                        Assignment::add(battery(r), -1),
                        Assignment::set(ok(r), Value::Bool(true)),
                    ],
                    Formula::and([Formula::eq(at(r), Value::Loc(to)), Formula::eq(ok(r), Value::Bool(true))]),
                ));
            }
        }
        for (res, cell) in resources {
            let here = Formula::eq(at(r), Value::Loc(*cell));
            actions.push(mk(
                GridAction::Gather { robot: r.clone(), resource: res.clone() },
                domain.gather,
                Formula::and([here.clone(), Formula::cmp(remaining(res), CmpOp::Ge, Value::Int(1))]),
                here,
                vec![
                    Assignment::add(remaining(res), -1),
                    Assignment::add(carrying(r), 1),
                    Assignment::set(ok(r), Value::Bool(true)),
                ],
                Formula::eq(ok(r), Value::Bool(true)),
            ));
        }
        let in_w = Formula::eq(at(r), Value::Loc(cfg.warehouse));
        actions.push(mk(
            GridAction::Deposit { robot: r.clone() },
            domain.deposit,
            Formula::and([in_w.clone(), Formula::cmp(carrying(r), CmpOp::Ge, Value::Int(1))]),
            in_w,
            vec![
                Assignment::add(carrying(r), -1),
                Assignment::add("stored", 1),
                Assignment::set(ok(r), Value::Bool(true)),
            ],
            Formula::eq(ok(r), Value::Bool(true)),
        ));
        for st in &cfg.stations {
            let here = Formula::eq(at(r), Value::Loc(*st));
            actions.push(mk(
                GridAction::Recharge { robot: r.clone(), station: *st },
                domain.recharge,
                here.clone(),
                here,
                vec![
                    Assignment::set(battery(r), Value::Int(cfg.battery_capacity)),
                    Assignment::set(ok(r), Value::Bool(true)),
                ],
                Formula::and([
                    Formula::eq(battery(r), Value::Int(cfg.battery_capacity)),
                    Formula::eq(ok(r), Value::Bool(true)),
                ]),
            ));
        }
    }
    let model = Model::new(symbols, actions, capacity)?.with_location_bounds(cfg.width, cfg.height);
    model.validate()?;
    Ok(model)
}

/// Short account of what changed between two snapshots, e.g.
/// `C1 moved up, robot "C2" has been added to the scene`.
pub fn describe_changes(prev: &BeliefSet, now: &BeliefSet, world: &GridWorld) -> String {
    let mut parts = Vec::new();
    let mut on_resource: BTreeMap<&str, &str> = BTreeMap::new();
    for (id, r) in &world.robots {
        if let Some((res, _)) = world.resources.iter().find(|(_, res)| res.at == r.at) {
            on_resource.insert(id.as_str(), res.as_str());
        }
    }
    for id in world.robots.keys() {
        let before = prev.get(&at(id)).and_then(Value::as_cell).unwrap_or(Cell::NOWHERE);
        let after = now.get(&at(id)).and_then(Value::as_cell).unwrap_or(Cell::NOWHERE);
        if before == Cell::NOWHERE && after != Cell::NOWHERE {
            parts.push(format!("robot \"{id}\" has been added to the scene"));
        } else if let Some(res) = on_resource.get(id.as_str()) {
            parts.push(format!("robot \"{id}\" is on \"{res}\""));
        } else if before != after {
            match Direction::between(before, after) {
                Some(d) => parts.push(format!("{id} moved {}", d.name())),
                None => parts.push(format!("{id} is now at {after}")),
            }
        }
        if now.int(&battery(id)) > prev.int(&battery(id)) && before != Cell::NOWHERE {
            parts.push(format!("{id} recharged"));
        }
        let (cb, ca) = (prev.int(&carrying(id)), now.int(&carrying(id)));
        if ca > cb {
            parts.push(format!("{id} carries {}", ca.unwrap_or(0)));
        }
    }
    if now.int("stored") > prev.int("stored") {
        parts.push(format!("{} stored in W", now.int("stored").unwrap_or(0)));
    }
    if parts.is_empty() {
        "no changes".into()
    } else {
        parts.join(", ")
    }
}
