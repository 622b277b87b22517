use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::sexpr::{self, SExpr};
use super::{Cell, Model, ModelError, SymbolKind, Valuation, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn from_str(s: &str) -> Option<CmpOp> {
        Some(match s {
            "=" => CmpOp::Eq,
            "!=" | "/=" => CmpOp::Ne,
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }
}

/// A symbol reference or a constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Sym(String),
    Const(Value),
}

impl Term {
    pub fn sym(name: impl Into<String>) -> Term {
        Term::Sym(name.into())
    }

    fn resolve(&self, b: &impl Valuation) -> Result<Value, ModelError> {
        match self {
            Term::Sym(s) => b.value_of(s).ok_or_else(|| ModelError::UndeclaredSymbol(s.clone())),
            Term::Const(v) => Ok(v.clone()),
        }
    }

    pub(crate) fn from_sexpr(e: &SExpr) -> Result<Term, ModelError> {
        match e {
            SExpr::Atom(a) => Ok(match a.as_str() {
                "true" => Term::Const(Value::Bool(true)),
                "false" => Term::Const(Value::Bool(false)),
                _ => match a.parse::<i64>() {
                    Ok(i) => Term::Const(Value::Int(i)),
                    Err(_) => Term::Sym(a.clone()),
                },
            }),
            SExpr::List(items) => {
                let head =
                    items.first().and_then(SExpr::as_atom).ok_or_else(|| ModelError::Parse(format!("bad term {e}")))?;
                let atoms: Vec<&str> = items[1..]
                    .iter()
                    .map(|i| i.as_atom().ok_or_else(|| ModelError::Parse(format!("nested argument in {e}"))))
                    .collect::<Result<_, _>>()?;
                match head {
                    "cell" => {
                        if atoms.len() != 2 {
                            return Err(ModelError::Parse(format!("cell takes two coordinates: {e}")));
                        }
                        let x = atoms[0].parse().map_err(|_| ModelError::Parse(format!("bad x in {e}")))?;
                        let y = atoms[1].parse().map_err(|_| ModelError::Parse(format!("bad y in {e}")))?;
                        Ok(Term::Const(Value::Loc(Cell::new(x, y))))
                    }
                    "agent" if atoms.len() == 1 => Ok(Term::Const(Value::Agent(atoms[0].to_string()))),
                    _ => Ok(Term::Sym(format!("{head}({})", atoms.join(",")))),
                }
            }
        }
    }
}

/// Renders a symbol name `f(a,b)` as `(f a b)`; bare names unchanged.
pub(crate) fn symbol_text(name: &str) -> String {
    match name.split_once('(') {
        Some((head, rest)) => {
            let args = rest.trim_end_matches(')');
            let mut out = format!("({head}");
            for a in args.split(',').filter(|a| !a.is_empty()) {
                out.push(' ');
                out.push_str(a);
            }
            out.push(')');
            out
        }
        None => name.to_string(),
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Sym(s) => f.write_str(&symbol_text(s)),
            Term::Const(v) => write!(f, "{v}"),
        }
    }
}

/// Quantifier-free condition over typed symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub enum Formula {
    #[default]
    True,
    False,
    Cmp(Term, CmpOp, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn parse(text: &str) -> Result<Formula, ModelError> {
        let e = sexpr::parse(text).map_err(ModelError::Parse)?;
        Formula::from_sexpr(&e)
    }

    pub fn eq(symbol: impl Into<String>, v: Value) -> Formula {
        Formula::Cmp(Term::Sym(symbol.into()), CmpOp::Eq, Term::Const(v))
    }

    pub fn cmp(symbol: impl Into<String>, op: CmpOp, v: Value) -> Formula {
        Formula::Cmp(Term::Sym(symbol.into()), op, Term::Const(v))
    }

    /// Conjunction that drops `true` members and flattens nested `and`s.
    pub fn and(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    fn from_sexpr(e: &SExpr) -> Result<Formula, ModelError> {
        match e {
            SExpr::Atom(a) if a == "true" => Ok(Formula::True),
            SExpr::Atom(a) if a == "false" => Ok(Formula::False),
            SExpr::Atom(a) => Err(ModelError::Parse(format!("bare atom `{a}` is not a formula"))),
            SExpr::List(items) => {
                let head = items
                    .first()
                    .and_then(SExpr::as_atom)
                    .ok_or_else(|| ModelError::Parse(format!("bad formula {e}")))?;
                let rest = &items[1..];
                match head {
                    "and" => Ok(Formula::And(rest.iter().map(Formula::from_sexpr).collect::<Result<_, _>>()?)),
                    "or" => Ok(Formula::Or(rest.iter().map(Formula::from_sexpr).collect::<Result<_, _>>()?)),
                    "not" if rest.len() == 1 => Ok(Formula::Not(Box::new(Formula::from_sexpr(&rest[0])?))),
                    op => match CmpOp::from_str(op) {
                        Some(op) if rest.len() == 2 => {
                            Ok(Formula::Cmp(Term::from_sexpr(&rest[0])?, op, Term::from_sexpr(&rest[1])?))
                        }
                        _ => Err(ModelError::Parse(format!("unknown formula head `{head}` in {e}"))),
                    },
                }
            }
        }
    }

    /// All symbol names referenced by the formula.
    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Cmp(l, _, r) => {
                for t in [l, r] {
                    if let Term::Sym(s) = t {
                        out.insert(s.clone());
                    }
                }
            }
            Formula::Not(f) => f.collect_symbols(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_symbols(out)),
        }
    }

    /// All constants appearing in comparisons.
    pub fn constants(&self) -> Vec<Value> {
        let mut out = Vec::new();
        self.walk_cmp(&mut |l, _, r| {
            for t in [l, r] {
                if let Term::Const(v) = t {
                    out.push(v.clone());
                }
            }
        });
        out
    }

    pub(crate) fn walk_cmp(&self, visit: &mut impl FnMut(&Term, CmpOp, &Term)) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Cmp(l, op, r) => visit(l, *op, r),
            Formula::Not(f) => f.walk_cmp(visit),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.walk_cmp(visit)),
        }
    }

    /// Type-checks the formula against the model's declarations.
    pub fn check(&self, model: &Model) -> Result<(), ModelError> {
        let mut result = Ok(());
        self.walk_cmp(&mut |l, op, r| {
            if result.is_err() {
                return;
            }
            result = check_cmp(model, l, op, r);
        });
        result
    }

    /// Canonical text: conjunctions and disjunctions flattened and sorted.
    pub fn canonical(&self) -> String {
        self.canonicalized().to_string()
    }

    pub fn canonicalized(&self) -> Formula {
        match self {
            Formula::And(fs) | Formula::Or(fs) => {
                let is_and = matches!(self, Formula::And(_));
                let mut flat = Vec::new();
                for f in fs {
                    match (is_and, f.canonicalized()) {
                        (true, Formula::And(inner)) | (false, Formula::Or(inner)) => flat.extend(inner),
                        (true, Formula::True) => {}
                        (false, Formula::False) => {}
                        (_, other) => flat.push(other),
                    }
                }
                flat.sort_by_key(|f| f.to_string());
                flat.dedup();
                match (flat.len(), is_and) {
                    (0, true) => Formula::True,
                    (0, false) => Formula::False,
                    (1, _) => flat.pop().unwrap(),
                    (_, true) => Formula::And(flat),
                    (_, false) => Formula::Or(flat),
                }
            }
            Formula::Not(f) => Formula::Not(Box::new(f.canonicalized())),
            other => other.clone(),
        }
    }
}

fn term_kind(model: &Model, t: &Term) -> Result<SymbolKind, ModelError> {
    match t {
        Term::Sym(s) => model.symbol(s).map(|d| d.kind.clone()).ok_or_else(|| ModelError::UndeclaredSymbol(s.clone())),
        Term::Const(Value::Bool(_)) => Ok(SymbolKind::Boolean),
        Term::Const(Value::Int(_)) => Ok(SymbolKind::integer()),
        Term::Const(Value::Loc(_)) => Ok(SymbolKind::Location),
        Term::Const(Value::Agent(_)) => Ok(SymbolKind::AgentId),
    }
}

fn check_cmp(model: &Model, l: &Term, op: CmpOp, r: &Term) -> Result<(), ModelError> {
    let lk = term_kind(model, l)?;
    let rk = term_kind(model, r)?;
    let name = |t: &Term| t.to_string();
    if lk.name() != rk.name() {
        return Err(ModelError::KindMismatch { symbol: name(l), expected: lk.name().into(), found: rk.name().into() });
    }
    if op.is_ordering() && !matches!(lk, SymbolKind::Integer { .. }) {
        return Err(ModelError::KindMismatch { symbol: name(l), expected: "integer".into(), found: lk.name().into() });
    }
    Ok(())
}

/// Evaluates `f` against a valuation. Pure and total over well-formed input.
pub fn evaluate(f: &Formula, b: &impl Valuation) -> Result<bool, ModelError> {
    Ok(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Not(g) => !evaluate(g, b)?,
        Formula::And(fs) => {
            for g in fs {
                if !evaluate(g, b)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Or(fs) => {
            for g in fs {
                if evaluate(g, b)? {
                    return Ok(true);
                }
            }
            false
        }
        Formula::Cmp(l, op, r) => {
            let lv = l.resolve(b)?;
            let rv = r.resolve(b)?;
            compare(&lv, *op, &rv, l)?
        }
    })
}

fn compare(l: &Value, op: CmpOp, r: &Value, lt: &Term) -> Result<bool, ModelError> {
    if l.kind_name() != r.kind_name() {
        return Err(ModelError::KindMismatch {
            symbol: lt.to_string(),
            expected: l.kind_name().into(),
            found: r.kind_name().into(),
        });
    }
    match op {
        CmpOp::Eq => Ok(l == r),
        CmpOp::Ne => Ok(l != r),
        _ => match (l, r) {
            (Value::Int(a), Value::Int(b)) => Ok(match op {
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                _ => a >= b,
            }),
            _ => Err(ModelError::KindMismatch {
                symbol: lt.to_string(),
                expected: "integer".into(),
                found: l.kind_name().into(),
            }),
        },
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Cmp(l, op, r) => write!(f, "({} {l} {r})", op.symbol()),
            Formula::Not(g) => write!(f, "(not {g})"),
            Formula::And(fs) | Formula::Or(fs) => {
                f.write_str(if matches!(self, Formula::And(_)) { "(and" } else { "(or" })?;
                for g in fs {
                    write!(f, " {g}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for Formula {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Formula::parse(s)
    }
}

impl Serialize for Formula {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Formula::parse(&text).map_err(serde::de::Error::custom)
    }
}
