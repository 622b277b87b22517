//! Grid-world environment: robots, resources, warehouse, recharging
//! stations and obstacles, with sensing, actuation and scripted events.

mod coordinator;
mod domain;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{apply_effects, evaluate, BeliefSet, Cell, Model, Tick, Value};

pub use coordinator::{coordinator_dispatch, RobotAssignment};
pub use domain::{build_model, describe_changes, Direction, DomainConfig, GridAction, Timing};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotConfig {
    pub id: String,
    /// Absent robots only appear when a spawn event names them.
    #[serde(default)]
    pub at: Option<Cell>,
    #[serde(default)]
    pub battery: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceConfig {
    pub id: String,
    pub at: Cell,
    #[serde(default)]
    pub count: i64,
}

/// Initial world as written in a scenario file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldConfig {
    #[serde(default = "six")]
    pub width: i32,
    #[serde(default = "six")]
    pub height: i32,
    pub robots: Vec<RobotConfig>,
    #[serde(default)]
    pub resources: Vec<ResourceConfig>,
    pub warehouse: Cell,
    #[serde(default)]
    pub stations: Vec<Cell>,
    #[serde(default)]
    pub obstacles: Vec<Cell>,
    #[serde(default = "twenty")]
    pub battery_capacity: i64,
}

fn six() -> i32 {
    6
}

fn twenty() -> i64 {
    20
}

impl WorldConfig {
    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Cell::new(x, y)))
    }

    pub fn robot_ids(&self) -> Vec<String> {
        self.robots.iter().map(|r| r.id.clone()).collect()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.width < 1 || self.height < 1 {
            return Err("grid must be at least 1x1".into());
        }
        let mut ids = BTreeSet::new();
        for r in &self.robots {
            if !ids.insert(&r.id) {
                return Err(format!("duplicate robot `{}`", r.id));
            }
            if let Some(c) = r.at {
                if !self.in_bounds(c) || self.obstacles.contains(&c) {
                    return Err(format!("robot `{}` placed on invalid cell {c}", r.id));
                }
            }
        }
        for res in &self.resources {
            if !ids.insert(&res.id) {
                return Err(format!("duplicate id `{}`", res.id));
            }
            if !self.in_bounds(res.at) || res.count < 0 {
                return Err(format!("resource `{}` is invalid", res.id));
            }
        }
        for c in std::iter::once(&self.warehouse).chain(&self.stations).chain(&self.obstacles) {
            if !self.in_bounds(*c) {
                return Err(format!("cell {c} is outside the grid"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Robot {
    pub at: Cell,
    pub battery: i64,
    pub carried: i64,
    /// Whether the last command of this robot succeeded.
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resource {
    pub at: Cell,
    pub remaining: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    MoveRobot { robot: String, to: Cell },
    SpawnRobot { robot: String, at: Cell },
    AddResource { resource: String, at: Cell, count: i64 },
    AddObstacle { cell: Cell },
    RemoveObstacle { cell: Cell },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSource {
    #[default]
    Script,
    Ui,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalEvent {
    #[serde(rename = "tick")]
    pub at: Tick,
    #[serde(flatten)]
    pub kind: EventKind,
    #[serde(default)]
    pub source: EventSource,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::MoveRobot { robot, to } => write!(f, "robot \"{robot}\" is moved to {to}"),
            EventKind::SpawnRobot { robot, .. } => write!(f, "A new robot \"{robot}\" is added to the scene"),
            EventKind::AddResource { resource, at, count } => {
                write!(f, "{count} samples of \"{resource}\" are added at {at}")
            }
            EventKind::AddObstacle { cell } => write!(f, "an obstacle is placed at {cell}"),
            EventKind::RemoveObstacle { cell } => write!(f, "the obstacle at {cell} is removed"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActuationCommand {
    pub actor: String,
    /// Grounded action id.
    pub action: String,
    pub started_at: Tick,
    pub completes_at: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub command: ActuationCommand,
    pub success: bool,
}

/// Ground truth of the simulation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridWorld {
    pub width: i32,
    pub height: i32,
    pub obstacles: BTreeSet<Cell>,
    pub robots: BTreeMap<String, Robot>,
    pub resources: BTreeMap<String, Resource>,
    pub warehouse: Cell,
    pub stored: i64,
    pub stations: BTreeSet<Cell>,
    pub battery_capacity: i64,
    pub tick: Tick,
    pub in_flight: BTreeMap<String, ActuationCommand>,
}

impl GridWorld {
    pub fn new(cfg: &WorldConfig) -> GridWorld {
        GridWorld {
            width: cfg.width,
            height: cfg.height,
            obstacles: cfg.obstacles.iter().copied().collect(),
            robots: cfg
                .robots
                .iter()
                .filter_map(|r| {
                    r.at.map(|at| {
                        let battery = r.battery.unwrap_or(cfg.battery_capacity);
                        (r.id.clone(), Robot { at, battery, carried: 0, ok: true })
                    })
                })
                .collect(),
            resources: cfg
                .resources
                .iter()
                .map(|r| (r.id.clone(), Resource { at: r.at, remaining: r.count }))
                .collect(),
            warehouse: cfg.warehouse,
            stored: 0,
            stations: cfg.stations.iter().copied().collect(),
            battery_capacity: cfg.battery_capacity,
            tick: 0,
            in_flight: BTreeMap::new(),
        }
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    fn free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.obstacles.contains(&c)
    }

    /// Full-observability snapshot over the model's symbols.
    pub fn read_sensing_data(&self, model: &Model) -> BeliefSet {
        let mut b = BeliefSet::new(self.tick);
        for s in &model.symbols {
            let v = self.symbol_value(&s.name).unwrap_or(Value::Bool(false));
            b.set(s.name.clone(), v);
        }
        b
    }

    fn symbol_value(&self, name: &str) -> Option<Value> {
        if name == "stored" {
            return Some(Value::Int(self.stored));
        }
        if name == "robot_count" {
            return Some(Value::Int(self.robots.len() as i64));
        }
        let (f, arg) = name.strip_suffix(')')?.split_once('(')?;
        let robot = self.robots.get(arg);
        Some(match f {
            "at" => Value::Loc(robot.map_or(Cell::NOWHERE, |r| r.at)),
            "battery" => Value::Int(robot.map_or(0, |r| r.battery)),
            "carrying" => Value::Int(robot.map_or(0, |r| r.carried)),
            "ok" => Value::Bool(robot.is_some_and(|r| r.ok)),
            "remaining" => Value::Int(self.resources.get(arg).map_or(0, |r| r.remaining)),
            "blocked" => {
                let (x, y) = arg.strip_prefix('c')?.split_once('_')?;
                Value::Bool(self.obstacles.contains(&Cell::new(x.parse().ok()?, y.parse().ok()?)))
            }
            _ => return None,
        })
    }

    /// Writes the robot, resource and warehouse symbols of `b` back into
    /// the ground truth.
    fn write_back(&mut self, b: &BeliefSet) {
        for (id, r) in self.robots.iter_mut() {
            if let Some(Value::Loc(c)) = b.get(&format!("at({id})")) {
                r.at = *c;
            }
            if let Some(v) = b.int(&format!("battery({id})")) {
                r.battery = v;
            }
            if let Some(v) = b.int(&format!("carrying({id})")) {
                r.carried = v;
            }
            if let Some(Value::Bool(v)) = b.get(&format!("ok({id})")) {
                r.ok = *v;
            }
        }
        for (id, r) in self.resources.iter_mut() {
            if let Some(v) = b.int(&format!("remaining({id})")) {
                r.remaining = v;
            }
        }
        if let Some(v) = b.int("stored") {
            self.stored = v;
        }
    }

    /// Registers a command. The actor must be present and idle.
    pub fn actuate(&mut self, cmd: ActuationCommand, model: &Model) -> Result<(), String> {
        let spec = model.action(&cmd.action).ok_or_else(|| format!("unknown action `{}`", cmd.action))?;
        if spec.actor != cmd.actor {
            return Err(format!("action `{}` does not belong to {}", cmd.action, cmd.actor));
        }
        if !self.robots.contains_key(&cmd.actor) {
            return Err(format!("robot {} is not in the scene", cmd.actor));
        }
        if self.in_flight.contains_key(&cmd.actor) {
            return Err(format!("robot {} is busy", cmd.actor));
        }
        self.in_flight.insert(cmd.actor.clone(), cmd);
        Ok(())
    }

    /// Drops the in-flight command of an actor (abort).
    pub fn cancel(&mut self, actor: &str) -> Option<ActuationCommand> {
        self.in_flight.remove(actor)
    }

    /// Advances the clock to `t` and completes the commands due at `t`,
    /// in actor order. A command whose action is not applicable in the
    /// ground truth at completion fails without effect.
    pub fn step_world(&mut self, t: Tick, model: &Model) -> Vec<Completion> {
        self.tick = t;
        let due: Vec<String> =
            self.in_flight.iter().filter(|(_, c)| c.completes_at <= t).map(|(a, _)| a.clone()).collect();
        let mut out = Vec::new();
        for actor in due {
            let cmd = self.in_flight.remove(&actor).unwrap();
            let success = self.complete(&cmd, model);
            out.push(Completion { command: cmd, success });
        }
        out
    }

    fn complete(&mut self, cmd: &ActuationCommand, model: &Model) -> bool {
        let Some(spec) = model.action(&cmd.action) else { return false };
        if !self.robots.contains_key(&cmd.actor) {
            return false;
        }
        let mut b = self.read_sensing_data(model);
        if evaluate(&spec.pre, &b).unwrap_or(false) {
            if let Ok(next) = apply_effects(&spec.effects, &b) {
                let target_ok = match next.get(&format!("at({})", cmd.actor)) {
                    Some(Value::Loc(c)) => self.free(*c),
                    _ => true,
                };
                if target_ok {
                    self.write_back(&next);
                    return true;
                }
            }
        }
        b.set(format!("ok({})", cmd.actor), Value::Bool(false));
        self.write_back(&b);
        false
    }

    /// Applies an external event immediately. Invalid events leave the
    /// world unchanged.
    pub fn inject_event(&mut self, e: &EventKind, model: &Model) -> Result<(), String> {
        match e {
            EventKind::MoveRobot { robot, to } => {
                if !self.free(*to) {
                    return Err(format!("cannot move {robot} to {to}"));
                }
                let r = self.robots.get_mut(robot).ok_or_else(|| format!("robot {robot} is not in the scene"))?;
                r.at = *to;
            }
            EventKind::SpawnRobot { robot, at } => {
                if !self.free(*at) {
                    return Err(format!("cannot spawn {robot} at {at}"));
                }
                if self.robots.contains_key(robot) {
                    return Err(format!("robot {robot} already exists"));
                }
                if model.symbol(&format!("at({robot})")).is_none() {
                    return Err(format!("robot {robot} is not declared"));
                }
                self.robots
                    .insert(robot.clone(), Robot { at: *at, battery: self.battery_capacity, carried: 0, ok: true });
            }
            EventKind::AddResource { resource, at, count } => {
                if *count < 0 || !self.in_bounds(*at) {
                    return Err(format!("invalid resource event for {resource}"));
                }
                if model.symbol(&format!("remaining({resource})")).is_none() {
                    return Err(format!("resource {resource} is not declared"));
                }
                let r = self.resources.entry(resource.clone()).or_insert(Resource { at: *at, remaining: 0 });
                if r.at != *at {
                    return Err(format!("resource {resource} lives at {}", r.at));
                }
                r.remaining += count;
            }
            EventKind::AddObstacle { cell } => {
                if !self.in_bounds(*cell) || self.robots.values().any(|r| r.at == *cell) {
                    return Err(format!("cannot place an obstacle at {cell}"));
                }
                self.obstacles.insert(*cell);
            }
            EventKind::RemoveObstacle { cell } => {
                if !self.obstacles.remove(cell) {
                    return Err(format!("no obstacle at {cell}"));
                }
            }
        }
        Ok(())
    }

    /// Samples on the ground, carried and stored.
    pub fn total_samples(&self) -> i64 {
        self.resources.values().map(|r| r.remaining).sum::<i64>()
            + self.robots.values().map(|r| r.carried).sum::<i64>()
            + self.stored
    }
}
