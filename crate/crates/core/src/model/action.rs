use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{apply_effects, evaluate, BeliefSet, Cell, EffectSet, Formula, Model, ModelError, SymbolKind, Value};
use crate::rational::{self, Rational};

/// A grounded durative action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub name: String,
    #[serde(default)]
    pub args: Vec<String>,
    /// The agent performing the action.
    pub actor: String,
    #[serde(default)]
    pub pre: Formula,
    pub duration: u64,
    #[serde(default)]
    pub context: Formula,
    #[serde(default)]
    pub effects: EffectSet,
    #[serde(default)]
    pub post: Formula,
    /// Utilization fraction consumed on the processor while active.
    #[serde(with = "rational::serde_text")]
    pub cost: Rational,
}

impl ActionSpec {
    /// Unique identifier, e.g. `move_up(C1,c0_0)`.
    pub fn id(&self) -> String {
        format!("{}({})", self.name, self.args.join(","))
    }

    /// Lower-case, underscore-joined name used in PDDL output.
    pub fn pddl_name(&self) -> String {
        let mut s = self.name.to_ascii_lowercase();
        for a in &self.args {
            s.push('_');
            s.push_str(&a.to_ascii_lowercase());
        }
        s
    }

    pub fn validate(&self, model: &Model) -> Result<(), ModelError> {
        let id = self.id();
        if self.duration < 1 {
            return Err(ModelError::Invalid(format!("action `{id}` has zero duration")));
        }
        if self.cost <= Rational::from_integer(0) || self.cost > model.capacity {
            return Err(ModelError::Invalid(format!(
                "action `{id}` cost {} outside (0, capacity]",
                rational::format_rational(&self.cost)
            )));
        }
        self.pre.check(model)?;
        self.context.check(model)?;
        self.post.check(model)?;
        self.effects.check(model)
    }

    fn symbols(&self) -> BTreeSet<String> {
        let mut s = self.pre.symbols();
        s.extend(self.context.symbols());
        s.extend(self.post.symbols());
        s.extend(self.effects.symbols());
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LintOutcome {
    Holds,
    /// A pre-state satisfying `pre` after which `post` fails.
    Violated(BTreeMap<String, Value>),
    Skipped(String),
}

impl LintOutcome {
    pub fn holds(&self) -> Option<bool> {
        match self {
            LintOutcome::Holds => Some(true),
            LintOutcome::Violated(_) => Some(false),
            LintOutcome::Skipped(_) => None,
        }
    }
}

const ENUMERATION_LIMIT: usize = 2_000_000;

/// Exhaustively checks that `post` holds in every state produced by
/// applying the action's effects to a state satisfying `pre`. Only the
/// symbols the action mentions are enumerated.
pub fn post_entails_effects(action: &ActionSpec, model: &Model) -> LintOutcome {
    let symbols: Vec<String> = action.symbols().into_iter().collect();
    let mut domains: Vec<Vec<Value>> = Vec::new();
    for s in &symbols {
        let Some(decl) = model.symbol(s) else {
            return LintOutcome::Skipped(format!("undeclared symbol `{s}`"));
        };
        let dom = match &decl.kind {
            SymbolKind::Boolean => vec![Value::Bool(false), Value::Bool(true)],
            SymbolKind::Integer { range: (lo, hi) } => (*lo..=*hi).map(Value::Int).collect(),
            SymbolKind::Location => match model.location_bounds {
                Some((w, h)) => (0..w).flat_map(|x| (0..h).map(move |y| Value::Loc(Cell::new(x, y)))).collect(),
                None => {
                    log::warn!("lint of `{}` skipped: no location bounds for `{s}`", action.id());
                    return LintOutcome::Skipped(format!("no enumeration range for `{s}`"));
                }
            },
            SymbolKind::AgentId => {
                let mut vals: BTreeSet<Value> = [&action.pre, &action.context, &action.post]
                    .iter()
                    .flat_map(|f| f.constants())
                    .filter(|v| matches!(v, Value::Agent(_)))
                    .collect();
                vals.insert(Value::Agent("_other".into()));
                vals.into_iter().collect()
            }
        };
        domains.push(dom);
    }
    let total = domains.iter().try_fold(1usize, |acc, d| acc.checked_mul(d.len()));
    match total {
        Some(n) if n <= ENUMERATION_LIMIT => {}
        _ => {
            log::warn!("lint of `{}` skipped: state space too large", action.id());
            return LintOutcome::Skipped("state space too large".into());
        }
    }

    let mut idx = vec![0usize; symbols.len()];
    loop {
        let mut b = BeliefSet::new(0);
        for (i, s) in symbols.iter().enumerate() {
            b.set(s.clone(), domains[i][idx[i]].clone());
        }
        if evaluate(&action.pre, &b).unwrap_or(false) {
            match apply_effects(&action.effects, &b).and_then(|after| evaluate(&action.post, &after)) {
                Ok(true) => {}
                _ => return LintOutcome::Violated(b.values),
            }
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == idx.len() {
                return LintOutcome::Holds;
            }
            idx[k] += 1;
            if idx[k] < domains[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Assignment, SymbolDecl};

    fn model() -> Model {
        Model::new(
            vec![
                SymbolDecl::new("battery", SymbolKind::Integer { range: (0, 20) }),
                SymbolDecl::new("at(C1)", SymbolKind::Location),
            ],
            vec![],
            Rational::from_integer(1),
        )
        .unwrap()
        .with_location_bounds(3, 3)
    }

    fn action(post: &str) -> ActionSpec {
        ActionSpec {
            name: "move_up".into(),
            args: vec!["C1".into(), "c0_0".into()],
            actor: "C1".into(),
            pre: Formula::parse("(and (= (at C1) (cell 0 0)) (>= battery 1))").unwrap(),
            duration: 10,
            context: Formula::True,
            effects: EffectSet::new(vec![
                Assignment::set("at(C1)", Value::Loc(Cell::new(0, 1))),
                Assignment::add("battery", -1),
            ]),
            post: Formula::parse(post).unwrap(),
            cost: Rational::new(1, 4),
        }
    }

    #[test]
    fn equalities_entail() {
        assert_eq!(post_entails_effects(&action("(= (at C1) (cell 0 1))"), &model()), LintOutcome::Holds);
    }

    #[test]
    fn true_post_entails() {
        assert_eq!(post_entails_effects(&action("true"), &model()), LintOutcome::Holds);
    }

    #[test]
    fn contradicting_post_fails() {
        let out = post_entails_effects(&action("(= (at C1) (cell 0 0))"), &model());
        assert!(matches!(out, LintOutcome::Violated(_)));
    }

    #[test]
    fn missing_location_bounds_skip() {
        let mut m = model();
        m.location_bounds = None;
        assert!(matches!(post_entails_effects(&action("true"), &m), LintOutcome::Skipped(_)));
    }

    #[test]
    fn id_and_pddl_name() {
        let a = action("true");
        assert_eq!(a.id(), "move_up(C1,c0_0)");
        assert_eq!(a.pddl_name(), "move_up_c1_c0_0");
    }
}
