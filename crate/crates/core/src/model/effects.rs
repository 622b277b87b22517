use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::formula::{symbol_text, Term};
use super::sexpr::{self, SExpr};
use super::{BeliefSet, Model, ModelError, SymbolKind, Valuation, Value};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EffectValue {
    Const(Value),
    /// `source + delta`, integer symbols only.
    Offset {
        source: String,
        delta: i64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub symbol: String,
    pub value: EffectValue,
}

impl Assignment {
    pub fn set(symbol: impl Into<String>, v: Value) -> Self {
        Assignment { symbol: symbol.into(), value: EffectValue::Const(v) }
    }

    pub fn add(symbol: impl Into<String>, delta: i64) -> Self {
        let symbol = symbol.into();
        Assignment { value: EffectValue::Offset { source: symbol.clone(), delta }, symbol }
    }

    pub fn parse(text: &str) -> Result<Assignment, ModelError> {
        let e = sexpr::parse(text).map_err(ModelError::Parse)?;
        let bad = || ModelError::Parse(format!("expected (:= symbol value), got {e}"));
        let SExpr::List(items) = &e else { return Err(bad()) };
        if items.len() != 3 || items[0].as_atom() != Some(":=") {
            return Err(bad());
        }
        let Term::Sym(symbol) = Term::from_sexpr(&items[1])? else { return Err(bad()) };
        let value = match &items[2] {
            SExpr::List(rhs) if matches!(rhs.first().and_then(SExpr::as_atom), Some("+" | "-")) => {
                if rhs.len() != 3 {
                    return Err(bad());
                }
                let Term::Sym(source) = Term::from_sexpr(&rhs[1])? else { return Err(bad()) };
                let k: i64 = rhs[2].as_atom().and_then(|a| a.parse().ok()).ok_or_else(bad)?;
                let delta = if rhs[0].as_atom() == Some("-") { -k } else { k };
                EffectValue::Offset { source, delta }
            }
            other => match Term::from_sexpr(other)? {
                Term::Const(v) => EffectValue::Const(v),
                Term::Sym(s) => EffectValue::Offset { source: s, delta: 0 },
            },
        };
        Ok(Assignment { symbol, value })
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lhs = symbol_text(&self.symbol);
        match &self.value {
            EffectValue::Const(v) => write!(f, "(:= {lhs} {v})"),
            EffectValue::Offset { source, delta } if *delta < 0 => {
                write!(f, "(:= {lhs} (- {} {}))", symbol_text(source), -delta)
            }
            EffectValue::Offset { source, delta } => {
                write!(f, "(:= {lhs} (+ {} {delta}))", symbol_text(source))
            }
        }
    }
}

impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Assignment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Assignment::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// The expected modification of the belief state caused by an action.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EffectSet {
    pub assignments: Vec<Assignment>,
}

impl EffectSet {
    pub fn new(assignments: Vec<Assignment>) -> Self {
        EffectSet { assignments }
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn targets(&self) -> BTreeSet<String> {
        self.assignments.iter().map(|a| a.symbol.clone()).collect()
    }

    /// Every symbol read or written by the effects.
    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = self.targets();
        for a in &self.assignments {
            if let EffectValue::Offset { source, .. } = &a.value {
                out.insert(source.clone());
            }
        }
        out
    }

    pub fn is_constant_only(&self) -> bool {
        self.assignments.iter().all(|a| matches!(a.value, EffectValue::Const(_)))
    }

    pub fn check(&self, model: &Model) -> Result<(), ModelError> {
        let mut seen = BTreeSet::new();
        for a in &self.assignments {
            if !seen.insert(&a.symbol) {
                return Err(ModelError::Invalid(format!("symbol `{}` assigned twice", a.symbol)));
            }
            let decl = model.symbol(&a.symbol).ok_or_else(|| ModelError::UndeclaredSymbol(a.symbol.clone()))?;
            match &a.value {
                EffectValue::Const(v) if !decl.kind.admits(v) => {
                    return Err(ModelError::KindMismatch {
                        symbol: a.symbol.clone(),
                        expected: decl.kind.name().into(),
                        found: v.kind_name().into(),
                    })
                }
                EffectValue::Offset { source, .. } => {
                    let src = model.symbol(source).ok_or_else(|| ModelError::UndeclaredSymbol(source.clone()))?;
                    for k in [&decl.kind, &src.kind] {
                        if !matches!(k, SymbolKind::Integer { .. }) {
                            return Err(ModelError::KindMismatch {
                                symbol: a.symbol.clone(),
                                expected: "integer".into(),
                                found: k.name().into(),
                            });
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Computes the new values against `b` (all right-hand sides read the
    /// pre-state).
    pub fn evaluate(&self, b: &impl Valuation) -> Result<Vec<(String, Value)>, ModelError> {
        self.assignments
            .iter()
            .map(|a| {
                let current = b.value_of(&a.symbol).ok_or_else(|| ModelError::UndeclaredSymbol(a.symbol.clone()))?;
                let new = match &a.value {
                    EffectValue::Const(v) => v.clone(),
                    EffectValue::Offset { source, delta } => {
                        let src = b.value_of(source).ok_or_else(|| ModelError::UndeclaredSymbol(source.clone()))?;
                        match src {
                            Value::Int(i) => Value::Int(i + delta),
                            other => {
                                return Err(ModelError::KindMismatch {
                                    symbol: source.clone(),
                                    expected: "integer".into(),
                                    found: other.kind_name().into(),
                                })
                            }
                        }
                    }
                };
                if current.kind_name() != new.kind_name() {
                    return Err(ModelError::KindMismatch {
                        symbol: a.symbol.clone(),
                        expected: current.kind_name().into(),
                        found: new.kind_name().into(),
                    });
                }
                Ok((a.symbol.clone(), new))
            })
            .collect()
    }
}

impl fmt::Display for EffectSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, a) in self.assignments.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("]")
    }
}

/// Returns a copy of `b` with the effects applied; `b` is untouched.
pub fn apply_effects(e: &EffectSet, b: &BeliefSet) -> Result<BeliefSet, ModelError> {
    let updates = e.evaluate(b)?;
    let mut out = b.clone();
    for (s, v) in updates {
        out.set(s, v);
    }
    Ok(out)
}
