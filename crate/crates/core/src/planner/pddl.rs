//! PDDL 2.1 export of a planning problem and parsing of temporal plan
//! text (`<start>: (<action> <args>) [<duration>]`).

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::PlanningProblem;
use crate::model::{ActionSpec, Assignment, Cell, CmpOp, EffectValue, Formula, Model, SymbolKind, Term, Value};
use crate::plan::{TimeTriggeredPlan, TtEntry};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PddlError {
    #[error("cannot express in PDDL: {}", .0.join("; "))]
    Inexpressible(Vec<String>),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown action `{action}`")]
    UnknownAction { line: usize, action: String },
    #[error("line {line}: duration of `{action}` is {found}, the model says {expected}")]
    Duration { line: usize, action: String, found: u64, expected: u64 },
}

/// `at(C1)` -> ("at", ["c1"]); `stored` -> ("stored", []).
fn split_symbol(s: &str) -> (String, Vec<String>) {
    match s.strip_suffix(')').and_then(|x| x.split_once('(')) {
        Some((f, args)) => (
            f.to_ascii_lowercase(),
            args.split(',').filter(|a| !a.is_empty()).map(|a| a.to_ascii_lowercase()).collect(),
        ),
        None => (s.to_ascii_lowercase(), Vec::new()),
    }
}

fn atom(f: &str, args: &[String]) -> String {
    if args.is_empty() {
        format!("({f})")
    } else {
        format!("({f} {})", args.join(" "))
    }
}

fn value_object(v: &Value) -> Option<String> {
    match v {
        Value::Loc(c) if *c != Cell::NOWHERE => Some(c.object_name()),
        Value::Agent(a) => Some(a.to_ascii_lowercase()),
        _ => None,
    }
}

struct Writer<'a> {
    model: &'a Model,
    errors: Vec<String>,
    objects: BTreeSet<String>,
    predicates: BTreeMap<String, usize>,
    functions: BTreeMap<String, usize>,
    disjunctive: bool,
}

impl<'a> Writer<'a> {
    fn new(model: &'a Model) -> Self {
        let mut w = Writer {
            model,
            errors: Vec::new(),
            objects: BTreeSet::new(),
            predicates: BTreeMap::new(),
            functions: BTreeMap::new(),
            disjunctive: false,
        };
        for s in &model.symbols {
            let (f, args) = split_symbol(&s.name);
            w.objects.extend(args.iter().cloned());
            match s.kind {
                SymbolKind::Boolean => {
                    w.predicates.insert(f, args.len());
                }
                SymbolKind::Integer { .. } => {
                    w.functions.insert(f, args.len());
                }
                SymbolKind::Location | SymbolKind::AgentId => {
                    w.predicates.insert(f, args.len() + 1);
                }
            }
        }
        if let Some((wd, ht)) = model.location_bounds {
            for y in 0..ht {
                for x in 0..wd {
                    w.objects.insert(Cell::new(x, y).object_name());
                }
            }
        }
        w
    }

    fn kind(&self, s: &str) -> Option<SymbolKind> {
        self.model.symbol(s).map(|d| d.kind.clone())
    }

    fn formula(&mut self, f: &Formula) -> String {
        match f {
            Formula::True => "(and)".into(),
            Formula::False => "(or)".into(),
            Formula::Not(g) => format!("(not {})", self.formula(g)),
            Formula::And(fs) => format!("(and {})", fs.iter().map(|g| self.formula(g)).collect::<Vec<_>>().join(" ")),
            Formula::Or(fs) => {
                self.disjunctive = true;
                format!("(or {})", fs.iter().map(|g| self.formula(g)).collect::<Vec<_>>().join(" "))
            }
            Formula::Cmp(l, op, r) => self.comparison(l, *op, r),
        }
    }

    fn comparison(&mut self, l: &Term, op: CmpOp, r: &Term) -> String {
        let (sym, op, v) = match (l, r) {
            (Term::Sym(s), Term::Const(v)) => (s, op, v.clone()),
            (Term::Const(v), Term::Sym(s)) if !op.is_ordering() => (s, op, v.clone()),
            (Term::Sym(a), Term::Sym(b)) if matches!(self.kind(a), Some(SymbolKind::Integer { .. })) => {
                let (fa, aa) = split_symbol(a);
                let (fb, ab) = split_symbol(b);
                return numeric(op, &atom(&fa, &aa), &atom(&fb, &ab));
            }
            _ => {
                self.errors.push(format!("comparison ({} {l} {r})", op.symbol()));
                return "(and)".into();
            }
        };
        let (f, args) = split_symbol(sym);
        let positive = |s: String| if op == CmpOp::Ne { format!("(not {s})") } else { s };
        match v {
            Value::Bool(b) => {
                let a = atom(&f, &args);
                let holds = (op == CmpOp::Eq) == b;
                if holds {
                    a
                } else {
                    format!("(not {a})")
                }
            }
            Value::Int(k) => numeric(op, &atom(&f, &args), &k.to_string()),
            other => match value_object(&other) {
                Some(o) => {
                    let mut full = args.clone();
                    full.push(o);
                    positive(atom(&f, &full))
                }
                None => {
                    self.errors.push(format!("comparison with {other}"));
                    "(and)".into()
                }
            },
        }
    }

    fn effects(&mut self, a: &ActionSpec) -> Vec<String> {
        let mut out = Vec::new();
        for Assignment { symbol, value } in &a.effects.assignments {
            let (f, args) = split_symbol(symbol);
            let target = atom(&f, &args);
            match (self.kind(symbol), value) {
                (Some(SymbolKind::Boolean), EffectValue::Const(Value::Bool(b))) => {
                    out.push(if *b { target } else { format!("(not {target})") })
                }
                (Some(SymbolKind::Integer { .. }), EffectValue::Const(Value::Int(k))) => {
                    out.push(format!("(assign {target} {k})"))
                }
                (Some(SymbolKind::Integer { .. }), EffectValue::Offset { source, delta }) if source == symbol => {
                    let verb = if *delta >= 0 { "increase" } else { "decrease" };
                    out.push(format!("({verb} {target} {})", delta.abs()));
                }
                (Some(SymbolKind::Location | SymbolKind::AgentId), EffectValue::Const(v)) => {
                    let old = prior_value(&a.pre, symbol);
                    match (old.as_ref().and_then(value_object), value_object(v)) {
                        (Some(o), Some(n)) => {
                            let mut del = args.clone();
                            del.push(o);
                            let mut add = args.clone();
                            add.push(n);
                            out.push(format!("(not {})", atom(&f, &del)));
                            out.push(atom(&f, &add));
                        }
                        _ => self.errors.push(format!("assignment to {symbol} in {} has no known prior value", a.id())),
                    }
                }
                _ => self.errors.push(format!("effect on {symbol} in {}", a.id())),
            }
        }
        out
    }
}

fn numeric(op: CmpOp, l: &str, r: &str) -> String {
    match op {
        CmpOp::Ne => format!("(not (= {l} {r}))"),
        _ => format!("({} {l} {r})", op.symbol()),
    }
}

fn prior_value(pre: &Formula, symbol: &str) -> Option<Value> {
    let mut found = None;
    pre.walk_cmp(&mut |l, op, r| {
        if let (Term::Sym(s), CmpOp::Eq, Term::Const(v)) = (l, op, r) {
            if s == symbol {
                found = Some(v.clone());
            }
        }
    });
    found
}

/// Returns `(domain, problem)` text. Every grounded action becomes a
/// parameterless durative action.
pub fn to_pddl(problem: &PlanningProblem) -> Result<(String, String), PddlError> {
    let model = problem.model;
    let mut w = Writer::new(model);
    let mut actions = String::new();
    let actors: BTreeSet<&str> = problem.actors.iter().map(String::as_str).collect();
    for a in model.actions.iter().filter(|a| actors.contains(a.actor.as_str())) {
        let pre = w.formula(&a.pre);
        let ctx = w.formula(&a.context);
        let eff = w.effects(a);
        let _ = write!(
            actions,
            "  (:durative-action {}\n    :parameters ()\n    :duration (= ?duration {})\n    :condition (and (at start {pre}) (over all {ctx}))\n    :effect (and",
            a.pddl_name(),
            a.duration
        );
        for e in eff {
            let _ = write!(actions, " (at end {e})");
        }
        actions.push_str("))\n");
    }
    let goal = w.formula(&problem.goal);
    if !w.errors.is_empty() {
        return Err(PddlError::Inexpressible(w.errors));
    }
    let mut reqs = vec![":durative-actions", ":fluents", ":negative-preconditions"];
    if w.disjunctive {
        reqs.push(":disjunctive-preconditions");
    }
    let mut domain = String::new();
    let _ = writeln!(domain, "(define (domain rtbdi)\n  (:requirements {})", reqs.join(" "));
    let params = |n: usize| (0..n).map(|i| format!(" ?a{i}")).collect::<String>();
    domain.push_str("  (:predicates");
    for (p, n) in &w.predicates {
        let _ = write!(domain, " ({p}{})", params(*n));
    }
    domain.push_str(")\n");
    if !w.functions.is_empty() {
        domain.push_str("  (:functions");
        for (f, n) in &w.functions {
            let _ = write!(domain, " ({f}{})", params(*n));
        }
        domain.push_str(")\n");
    }
    domain.push_str(&actions);
    domain.push_str(")\n");

    let mut prob = String::new();
    let _ = writeln!(prob, "(define (problem rtbdi-problem)\n  (:domain rtbdi)");
    let _ = writeln!(prob, "  (:objects {})", w.objects.iter().cloned().collect::<Vec<_>>().join(" "));
    prob.push_str("  (:init");
    for (s, v) in &problem.initial.values {
        if model.symbol(s).is_none() {
            continue;
        }
        let (f, args) = split_symbol(s);
        match v {
            Value::Bool(true) => {
                let _ = write!(prob, "\n    {}", atom(&f, &args));
            }
            Value::Bool(false) => {}
            Value::Int(k) => {
                let _ = write!(prob, "\n    (= {} {k})", atom(&f, &args));
            }
            other => {
                if let Some(o) = value_object(other) {
                    let mut full = args.clone();
                    full.push(o);
                    let _ = write!(prob, "\n    {}", atom(&f, &full));
                }
            }
        }
    }
    prob.push_str(")\n");
    let _ = writeln!(prob, "  (:goal {goal})");
    let _ = writeln!(prob, "  ; deadline: {} ticks", problem.deadline);
    prob.push_str("  (:metric minimize (total-time)))\n");
    Ok((domain, prob))
}

/// Parses plan text. Times are multiplied by `ticks_per_unit` and rounded
/// half up; the result is sorted by start.
pub fn parse_plan_text(text: &str, model: &Model, ticks_per_unit: f64) -> Result<TimeTriggeredPlan, PddlError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: &str| PddlError::Parse { line: line_no, message: m.to_string() };
        let (start, rest) = line.split_once(':').ok_or_else(|| err("expected `<start>: (<action>) [<duration>]`"))?;
        let start: f64 = start.trim().parse().map_err(|_| err("bad start time"))?;
        let rest = rest.trim();
        let open = rest.find('(').ok_or_else(|| err("missing `(`"))?;
        let close = rest.find(')').ok_or_else(|| err("missing `)`"))?;
        if close < open {
            return Err(err("mismatched parentheses"));
        }
        let words: Vec<String> = rest[open + 1..close].split_whitespace().map(str::to_string).collect();
        let (name, args) = words.split_first().ok_or_else(|| err("empty action"))?;
        let dur_text = rest[close + 1..].trim();
        let dur: f64 = dur_text
            .strip_prefix('[')
            .and_then(|d| d.strip_suffix(']'))
            .ok_or_else(|| err("missing `[duration]`"))?
            .trim()
            .parse()
            .map_err(|_| err("bad duration"))?;
        if start < 0.0 || dur < 0.0 {
            return Err(err("negative time"));
        }
        let round = |x: f64| (x * ticks_per_unit + 0.5).floor() as u64;
        let spec = model
            .action_by_pddl(name, args)
            .ok_or_else(|| PddlError::UnknownAction { line: line_no, action: words.join(" ") })?;
        let d = round(dur);
        if d != spec.duration {
            return Err(PddlError::Duration { line: line_no, action: spec.id(), found: d, expected: spec.duration });
        }
        entries.push(TtEntry { start: round(start), action: spec.id(), duration: d, actor: spec.actor.clone() });
    }
    Ok(TimeTriggeredPlan::new(entries))
}
