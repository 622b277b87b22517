//! The shared agent model: typed symbols, belief sets, the condition
//! language and the durative-action library.

mod action;
mod effects;
mod formula;
pub mod sexpr;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{self, Rational};

pub use action::{post_entails_effects, ActionSpec, LintOutcome};
pub use effects::{apply_effects, Assignment, EffectSet, EffectValue};
pub use formula::{evaluate, CmpOp, Formula, Term};

pub type Tick = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("undeclared symbol `{0}`")]
    UndeclaredSymbol(String),
    #[error("kind mismatch on `{symbol}`: expected {expected}, found {found}")]
    KindMismatch { symbol: String, expected: String, found: String },
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// A grid cell. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(i32, i32)", into = "(i32, i32)")]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    /// Sentinel position of an entity that is not in the world.
    pub const NOWHERE: Cell = Cell { x: -1, y: -1 };

    pub fn manhattan(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    /// PDDL-friendly object name, e.g. `c2_3`.
    pub fn object_name(self) -> String {
        format!("c{}_{}", self.x, self.y)
    }
}

impl From<(i32, i32)> for Cell {
    fn from((x, y): (i32, i32)) -> Self {
        Cell { x, y }
    }
}

impl From<Cell> for (i32, i32) {
    fn from(c: Cell) -> Self {
        (c.x, c.y)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(cell {} {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Loc(Cell),
    Agent(String),
}

impl Value {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "boolean",
            Value::Int(_) => "integer",
            Value::Loc(_) => "location",
            Value::Agent(_) => "agent-id",
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_cell(&self) -> Option<Cell> {
        match self {
            Value::Loc(c) => Some(*c),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Loc(c) => write!(f, "{c}"),
            Value::Agent(a) => write!(f, "(agent {a})"),
        }
    }
}

/// Declared kind of a symbol. Integer symbols carry the range used by
/// exhaustive configuration lints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SymbolKind {
    Boolean,
    Integer {
        #[serde(default = "default_range")]
        range: (i64, i64),
    },
    Location,
    AgentId,
}

fn default_range() -> (i64, i64) {
    (0, 16)
}

impl SymbolKind {
    pub fn integer() -> Self {
        SymbolKind::Integer { range: default_range() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SymbolKind::Boolean => "boolean",
            SymbolKind::Integer { .. } => "integer",
            SymbolKind::Location => "location",
            SymbolKind::AgentId => "agent-id",
        }
    }

    pub fn admits(&self, v: &Value) -> bool {
        matches!(
            (self, v),
            (SymbolKind::Boolean, Value::Bool(_))
                | (SymbolKind::Integer { .. }, Value::Int(_))
                | (SymbolKind::Location, Value::Loc(_))
                | (SymbolKind::AgentId, Value::Agent(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolDecl {
    pub name: String,
    #[serde(flatten)]
    pub kind: SymbolKind,
}

impl SymbolDecl {
    pub fn new(name: impl Into<String>, kind: SymbolKind) -> Self {
        SymbolDecl { name: name.into(), kind }
    }
}

/// Read access to symbol values; implemented by belief sets and by the
/// compact states used inside search.
pub trait Valuation {
    fn value_of(&self, symbol: &str) -> Option<Value>;
}

impl Valuation for BTreeMap<String, Value> {
    fn value_of(&self, symbol: &str) -> Option<Value> {
        self.get(symbol).cloned()
    }
}

/// The model shared by every layer of the agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Model {
    pub symbols: Vec<SymbolDecl>,
    pub actions: Vec<ActionSpec>,
    #[serde(with = "rational::serde_text")]
    pub capacity: Rational,
    /// Width and height of the location domain, used to enumerate
    /// location-kind symbols in lints.
    #[serde(default)]
    pub location_bounds: Option<(i32, i32)>,
    #[serde(skip)]
    symbol_index: BTreeMap<String, usize>,
    #[serde(skip)]
    action_index: BTreeMap<String, usize>,
}

impl Model {
    pub fn new(symbols: Vec<SymbolDecl>, actions: Vec<ActionSpec>, capacity: Rational) -> Result<Self, ModelError> {
        let mut m = Model {
            symbols,
            actions,
            capacity,
            location_bounds: None,
            symbol_index: BTreeMap::new(),
            action_index: BTreeMap::new(),
        };
        m.reindex()?;
        Ok(m)
    }

    pub fn with_location_bounds(mut self, width: i32, height: i32) -> Self {
        self.location_bounds = Some((width, height));
        self
    }

    /// Rebuilds lookup tables; required after deserialization.
    pub fn reindex(&mut self) -> Result<(), ModelError> {
        self.symbol_index.clear();
        for (i, s) in self.symbols.iter().enumerate() {
            if self.symbol_index.insert(s.name.clone(), i).is_some() {
                return Err(ModelError::DuplicateSymbol(s.name.clone()));
            }
        }
        self.action_index.clear();
        for (i, a) in self.actions.iter().enumerate() {
            if self.action_index.insert(a.id(), i).is_some() {
                return Err(ModelError::Invalid(format!("duplicate action `{}`", a.id())));
            }
        }
        Ok(())
    }

    pub fn symbol(&self, name: &str) -> Option<&SymbolDecl> {
        self.symbol_index.get(name).map(|&i| &self.symbols[i])
    }

    pub fn action(&self, id: &str) -> Option<&ActionSpec> {
        self.action_index.get(id).map(|&i| &self.actions[i])
    }

    pub fn require_action(&self, id: &str) -> Result<&ActionSpec, ModelError> {
        self.action(id).ok_or_else(|| ModelError::UnknownAction(id.to_string()))
    }

    /// Looks up an action by its PDDL-style name, joining name and
    /// arguments with `_` and ignoring case.
    pub fn action_by_pddl(&self, name: &str, args: &[String]) -> Option<&ActionSpec> {
        let mut key = name.to_ascii_lowercase();
        for a in args {
            key.push('_');
            key.push_str(&a.to_ascii_lowercase());
        }
        self.actions.iter().find(|a| a.pddl_name() == key)
    }

    /// Checks every structural invariant of the model.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.capacity <= Rational::from_integer(0) {
            return Err(ModelError::Invalid("capacity must be positive".into()));
        }
        for a in &self.actions {
            a.validate(self)?;
        }
        Ok(())
    }

    /// Checks that `b` assigns a well-kinded value to every declared symbol.
    pub fn check_belief(&self, b: &BeliefSet) -> Result<(), ModelError> {
        for s in &self.symbols {
            let v = b.get(&s.name).ok_or_else(|| ModelError::UndeclaredSymbol(s.name.clone()))?;
            if !s.kind.admits(v) {
                return Err(ModelError::KindMismatch {
                    symbol: s.name.clone(),
                    expected: s.kind.name().into(),
                    found: v.kind_name().into(),
                });
            }
        }
        if b.values.len() != self.symbols.len() {
            let extra = b.values.keys().find(|k| self.symbol(k).is_none()).unwrap();
            return Err(ModelError::UndeclaredSymbol(extra.clone()));
        }
        Ok(())
    }
}

/// Total assignment of values to the model's symbols at a given tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefSet {
    pub values: BTreeMap<String, Value>,
    pub timestamp: Tick,
}

impl BeliefSet {
    pub fn new(timestamp: Tick) -> Self {
        BeliefSet { values: BTreeMap::new(), timestamp }
    }

    pub fn get(&self, symbol: &str) -> Option<&Value> {
        self.values.get(symbol)
    }

    pub fn set(&mut self, symbol: impl Into<String>, v: Value) {
        self.values.insert(symbol.into(), v);
    }

    pub fn int(&self, symbol: &str) -> Option<i64> {
        self.get(symbol).and_then(Value::as_int)
    }
}

impl Valuation for BeliefSet {
    fn value_of(&self, symbol: &str) -> Option<Value> {
        self.values.get(symbol).cloned()
    }
}
