//! Properties of formulas, plan trees and the goal plan library, each
//! against a small reference implementation.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use rtbdi::bdi::{lookup_plan, ActiveGoal, Desire, GoalPlanLibrary};
use rtbdi::model::{
    apply_effects, evaluate, ActionSpec, Assignment, BeliefSet, CmpOp, EffectSet, Formula, Model, SymbolDecl,
    SymbolKind, Term, Tick, Value,
};
use rtbdi::plan::{nominal_schedule, Branch, Frontier, NodePath, Plan, PlanNode, Ready};
use rtbdi::rational::Rational;

// ---------------------------------------------------------------------------
// formulas

const BOOLS: [&str; 3] = ["p", "q", "s"];
const INTS: [&str; 2] = ["x", "y"];

fn formula_model() -> Model {
    let mut symbols: Vec<SymbolDecl> = BOOLS.iter().map(|b| SymbolDecl::new(*b, SymbolKind::Boolean)).collect();
    symbols.extend(INTS.iter().map(|i| SymbolDecl::new(*i, SymbolKind::Integer { range: (0, 4) })));
    Model::new(symbols, vec![], Rational::from_integer(1)).unwrap()
}

fn beliefs() -> impl Strategy<Value = BeliefSet> {
    (prop::collection::vec(any::<bool>(), 3), prop::collection::vec(0i64..=4, 2)).prop_map(|(bs, is)| {
        let mut b = BeliefSet::new(0);
        for (n, v) in BOOLS.iter().zip(bs) {
            b.set(*n, Value::Bool(v));
        }
        for (n, v) in INTS.iter().zip(is) {
            b.set(*n, Value::Int(v));
        }
        b
    })
}

fn op() -> impl Strategy<Value = CmpOp> {
    prop_oneof![Just(CmpOp::Eq), Just(CmpOp::Ne), Just(CmpOp::Lt), Just(CmpOp::Le), Just(CmpOp::Gt), Just(CmpOp::Ge)]
}

fn atom() -> impl Strategy<Value = Formula> {
    let int_term = prop_oneof![
        prop::sample::select(INTS.to_vec()).prop_map(Term::sym),
        (0i64..=4).prop_map(|i| Term::Const(Value::Int(i))),
    ];
    prop_oneof![
        Just(Formula::True),
        Just(Formula::False),
        (prop::sample::select(BOOLS.to_vec()), any::<bool>(), any::<bool>()).prop_map(|(s, v, eq)| {
            Formula::Cmp(Term::sym(s), if eq { CmpOp::Eq } else { CmpOp::Ne }, Term::Const(Value::Bool(v)))
        }),
        (prop::sample::select(INTS.to_vec()), op(), int_term).prop_map(|(s, o, t)| Formula::Cmp(Term::sym(s), o, t)),
    ]
}

fn formula() -> impl Strategy<Value = Formula> {
    atom().prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|f| Formula::Not(Box::new(f))),
            prop::collection::vec(inner.clone(), 0..3).prop_map(Formula::And),
            prop::collection::vec(inner, 0..3).prop_map(Formula::Or),
        ]
    })
}

fn term_value(t: &Term, b: &BeliefSet) -> Value {
    match t {
        Term::Sym(s) => b.values[s].clone(),
        Term::Const(v) => v.clone(),
    }
}

/// Reference evaluator written directly from the connective truth tables.
fn oracle(f: &Formula, b: &BeliefSet) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Not(g) => !oracle(g, b),
        Formula::And(fs) => fs.iter().fold(true, |acc, g| acc & oracle(g, b)),
        Formula::Or(fs) => fs.iter().fold(false, |acc, g| acc | oracle(g, b)),
        Formula::Cmp(l, o, r) => {
            let (l, r) = (term_value(l, b), term_value(r, b));
            match (o, l, r) {
                (CmpOp::Eq, l, r) => l == r,
                (CmpOp::Ne, l, r) => l != r,
                (o, Value::Int(a), Value::Int(c)) => match o {
                    CmpOp::Lt => a < c,
                    CmpOp::Le => a <= c,
                    CmpOp::Gt => a > c,
                    _ => a >= c,
                },
                other => panic!("ill-typed comparison {other:?}"),
            }
        }
    }
}

proptest! {
    #[test]
    fn evaluate_matches_truth_tables(f in formula(), b in beliefs()) {
        prop_assert_eq!(evaluate(&f, &b).unwrap(), oracle(&f, &b));
    }

    #[test]
    fn negation_and_conjunction(f in formula(), g in formula(), b in beliefs()) {
        let ef = evaluate(&f, &b).unwrap();
        let eg = evaluate(&g, &b).unwrap();
        prop_assert_eq!(evaluate(&Formula::Not(Box::new(f.clone())), &b).unwrap(), !ef);
        prop_assert_eq!(evaluate(&Formula::And(vec![f, g]), &b).unwrap(), ef && eg);
    }

    #[test]
    fn text_and_canonical_forms_keep_meaning(f in formula(), b in beliefs()) {
        let m = formula_model();
        f.check(&m).unwrap();
        let reparsed = Formula::parse(&f.to_string()).unwrap();
        let e = evaluate(&f, &b).unwrap();
        prop_assert_eq!(evaluate(&reparsed, &b).unwrap(), e);
        prop_assert_eq!(evaluate(&f.canonicalized(), &b).unwrap(), e);
        prop_assert_eq!(f.canonicalized().canonical(), f.canonical());
    }

    #[test]
    fn constant_effects_are_idempotent(b in beliefs(), v in any::<bool>(), i in 0i64..=4) {
        let e = EffectSet::new(vec![Assignment::set("p", Value::Bool(v)), Assignment::set("x", Value::Int(i))]);
        let once = apply_effects(&e, &b).unwrap();
        prop_assert_eq!(apply_effects(&e, &once).unwrap(), once);
    }
}

// ---------------------------------------------------------------------------
// plan trees

fn action(name: &str, duration: u64, cost: Rational) -> ActionSpec {
    ActionSpec {
        name: name.into(),
        args: vec!["X".into()],
        actor: "X".into(),
        pre: Formula::True,
        duration,
        context: Formula::True,
        effects: EffectSet::default(),
        post: Formula::True,
        cost,
    }
}

fn tree_model() -> Model {
    let actions = (1..=4).map(|d| action(&format!("a{d}"), d, Rational::new(1, 10))).collect();
    Model::new(vec![], actions, Rational::from_integer(1)).unwrap()
}

fn node() -> impl Strategy<Value = PlanNode> {
    let leaf = (1u64..=4, 0u64..=2).prop_map(|(d, s)| {
        let mut n = PlanNode::atomic(format!("a{d}(X)"), "X");
        if let PlanNode::Atomic(a) = &mut n {
            a.start = s;
        }
        n
    });
    leaf.prop_recursive(3, 8, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..=3).prop_map(PlanNode::Sequential),
            prop::collection::vec((0u64..=3, inner), 1..=3).prop_map(|bs| PlanNode::Parallel(
                bs.into_iter().map(|(delay, node)| Branch { delay, node }).collect()
            )),
        ]
    })
}

fn duration_of(action: &str) -> Tick {
    action[1..2].parse().unwrap()
}

/// Reference schedule: start tick of every atomic when each runs as soon
/// as its position in the tree allows. Returns the node's end tick.
fn reference(n: &PlanNode, at: Tick, path: &mut NodePath, out: &mut BTreeMap<NodePath, Tick>) -> Tick {
    match n {
        PlanNode::Atomic(a) => {
            out.insert(path.clone(), at + a.start);
            at + a.start + duration_of(&a.action)
        }
        PlanNode::Sequential(c) => {
            let mut t = at;
            for (i, child) in c.iter().enumerate() {
                path.push(i);
                t = reference(child, t, path, out);
                path.pop();
            }
            t
        }
        PlanNode::Parallel(bs) => {
            let mut end = at;
            for (i, b) in bs.iter().enumerate() {
                path.push(i);
                end = end.max(reference(&b.node, at + b.delay, path, out));
                path.pop();
            }
            end
        }
        PlanNode::SubGoal(_) => unreachable!(),
    }
}

/// Drives the frontier tick by tick, starting everything that is ready.
/// Returns the ready set seen at each tick and the tick the root is done.
fn interpret(plan: &Plan, t0: Tick) -> (BTreeMap<Tick, BTreeSet<NodePath>>, Tick) {
    let mut f = Frontier::new(plan, t0);
    let mut running: Vec<(NodePath, Tick)> = Vec::new();
    let mut seen = BTreeMap::new();
    let mut t = t0;
    while !f.is_done() {
        let (done, rest): (Vec<_>, Vec<_>) = running.into_iter().partition(|(_, end)| *end == t);
        running = rest;
        for (p, _) in done {
            f.complete(plan, &p, t).unwrap();
        }
        if f.is_done() {
            break;
        }
        for r in f.ready(plan, t) {
            let Ready::Atomic { path, atomic } = r else { unreachable!() };
            f.start(plan, &path, t).unwrap();
            seen.entry(t).or_insert_with(BTreeSet::new).insert(path.clone());
            running.push((path, t + duration_of(&atomic.action)));
        }
        t += 1;
        assert!(t < t0 + 1000, "frontier never finished");
    }
    (seen, t)
}

proptest! {
    #[test]
    fn frontier_follows_reference_schedule(root in node(), t0 in 0u64..50) {
        let m = tree_model();
        let plan = Plan::new("P1", &Formula::True, root, Formula::True, Formula::True, &m).unwrap();
        let mut starts = BTreeMap::new();
        let end = reference(&plan.root, t0, &mut Vec::new(), &mut starts);
        let mut expect: BTreeMap<Tick, BTreeSet<NodePath>> = BTreeMap::new();
        for (p, s) in &starts {
            expect.entry(*s).or_default().insert(p.clone());
        }
        let (seen, done_at) = interpret(&plan, t0);
        prop_assert_eq!(seen, expect);
        prop_assert_eq!(done_at, end);
        prop_assert_eq!(plan.makespan, end - t0);
        let nominal: BTreeMap<NodePath, Tick> =
            nominal_schedule(&plan.root, &m).unwrap().into_iter().map(|s| (s.path, s.start + t0)).collect();
        prop_assert_eq!(nominal, starts);
    }

    #[test]
    fn abort_stops_every_running_leaf(root in node(), cut in 0u64..12) {
        let m = tree_model();
        let plan = Plan::new("P1", &Formula::True, root, Formula::True, Formula::True, &m).unwrap();
        let mut starts = BTreeMap::new();
        reference(&plan.root, 0, &mut Vec::new(), &mut starts);
        let mut f = Frontier::new(&plan, 0);
        let mut running: Vec<(NodePath, Tick)> = Vec::new();
        for t in 0..=cut {
            let (done, rest): (Vec<_>, Vec<_>) = running.into_iter().partition(|(_, e)| *e == t);
            running = rest;
            for (p, _) in done {
                f.complete(&plan, &p, t).unwrap();
            }
            if t == cut || f.is_done() {
                break;
            }
            for r in f.ready(&plan, t) {
                let Ready::Atomic { path, atomic } = r else { unreachable!() };
                f.start(&plan, &path, t).unwrap();
                running.push((path, t + duration_of(&atomic.action)));
            }
        }
        let expect: BTreeSet<NodePath> = running.iter().map(|(p, _)| p.clone()).collect();
        let killed: BTreeSet<NodePath> = f.abort_all(&plan).into_iter().collect();
        if f.is_done() {
            prop_assert!(killed.is_empty());
        } else {
            prop_assert_eq!(killed, expect);
            prop_assert!(f.ready(&plan, cut + 100).is_empty());
        }
    }
}

// ---------------------------------------------------------------------------
// library

fn cost_model(costs: &[Rational]) -> Model {
    let actions =
        costs.iter().enumerate().map(|(i, c)| action(&format!("a{}", i % 4 + 1), (i % 4 + 1) as u64, *c)).collect();
    Model::new(vec![], actions, Rational::from_integer(1)).unwrap()
}

fn goal(deadline: Tick) -> ActiveGoal {
    let d = Desire {
        id: "G1".into(),
        pre: Formula::True,
        goal: Formula::parse("(= done true)").unwrap(),
        deadline,
        priority: 0,
        description: String::new(),
    };
    ActiveGoal::activate(&d, 0)
}

fn bodies() -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(0usize..4, 1..4), 1..6)
}

fn library(bodies: &[Vec<usize>], m: &Model) -> GoalPlanLibrary {
    let g = goal(100);
    let plans = bodies
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let root =
                PlanNode::Sequential(b.iter().map(|a| PlanNode::atomic(format!("a{}(X)", a + 1), "X")).collect());
            Plan::new(format!("P{}", i + 1), &g.goal, root, Formula::True, Formula::True, m).unwrap()
        })
        .collect();
    GoalPlanLibrary::from_plans(plans, m).unwrap()
}

fn done_model(costs: &[Rational]) -> Model {
    let mut m = cost_model(costs);
    m.symbols.push(SymbolDecl::new("done", SymbolKind::Boolean));
    m.reindex().unwrap();
    m
}

proptest! {
    #[test]
    fn cost_scaling_keeps_the_choice(bodies in bodies(), costs in prop::collection::vec(1i64..=5, 4), k in 1i64..=9) {
        let base: Vec<Rational> = costs.iter().map(|c| Rational::new(*c, 10)).collect();
        let scaled: Vec<Rational> = base.iter().map(|c| *c * Rational::new(k, 10)).collect();
        let (m1, m2) = (done_model(&base), done_model(&scaled));
        let (l1, l2) = (library(&bodies, &m1), library(&bodies, &m2));
        for p in l2.plans() {
            prop_assert_eq!(p.total_cost, l1.get(&p.id).unwrap().total_cost * Rational::new(k, 10));
        }
        let b = BeliefSet::new(0);
        let none = BTreeSet::new();
        let a = lookup_plan(&goal(100), &l1, &b, 0, &none).map(|p| p.id.clone());
        let c = lookup_plan(&goal(100), &l2, &b, 0, &none).map(|p| p.id.clone());
        prop_assert_eq!(a, c);
    }

    #[test]
    fn library_only_grows(first in bodies(), later in bodies()) {
        let m = done_model(&[Rational::new(1, 10); 4]);
        let mut lib = library(&first, &m);
        let g = goal(100);
        let mut size = lib.len();
        for body in later {
            let root = PlanNode::Sequential(body.iter().map(|a| PlanNode::atomic(format!("a{}(X)", a + 1), "X")).collect());
            let plan = Plan::new(lib.next_id(), &g.goal, root, Formula::True, Formula::True, &m).unwrap();
            let id = lib.insert(plan.clone()).unwrap();
            prop_assert!(lib.len() >= size);
            size = lib.len();
            // retrievable with the same beliefs when it is the only candidate
            let exclude: BTreeSet<String> = lib.plans().map(|p| p.id.clone()).filter(|p| *p != id).collect();
            let found = lookup_plan(&g, &lib, &BeliefSet::new(0), 0, &exclude).map(|p| p.root.clone());
            prop_assert_eq!(found, Some(plan.root));
        }
        let text = lib.to_json();
        let back = GoalPlanLibrary::from_json(&text, &m).unwrap();
        prop_assert_eq!(back.len(), lib.len());
    }
}
