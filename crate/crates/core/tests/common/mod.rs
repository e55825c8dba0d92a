//! Reference implementations used only as test oracles. They share no code
//! with the library beyond the AST types.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use llmdp::grounding::ActionCall;
use llmdp::pddl::{
    ActionSchema, Atom, DomainDef, GoalFormula, LiteralTemplate, PredicateDecl, ProblemDef, Term, TypeDecl,
    TypedVar,
};
use rand::seq::SliceRandom;
use rand::Rng;

fn type_ok(param_type: &str, object_type: &str) -> bool {
    param_type == "object" || param_type == object_type
}

fn substitute(lit: &LiteralTemplate, binding: &HashMap<&str, &str>) -> Atom {
    Atom::new(
        lit.predicate.clone(),
        lit.args.iter().map(|t| match t {
            Term::Var(v) => binding[v.as_str()].to_string(),
            Term::Const(c) => c.clone(),
        }),
    )
}

fn literal_holds(lit: &LiteralTemplate, binding: &HashMap<&str, &str>, state: &BTreeSet<Atom>) -> bool {
    let atom = substitute(lit, binding);
    let truth = if lit.predicate == "=" {
        atom.args[0] == atom.args[1]
    } else {
        state.contains(&atom)
    };
    truth == lit.positive
}

/// Applies a call straight from the lifted schema; `None` if inapplicable.
pub fn apply_lifted(domain: &DomainDef, state: &BTreeSet<Atom>, call: &ActionCall) -> Option<BTreeSet<Atom>> {
    let schema = domain.actions.iter().find(|a| a.name == call.name)?;
    if schema.params.len() != call.args.len() {
        return None;
    }
    let binding: HashMap<&str, &str> = schema
        .params
        .iter()
        .zip(&call.args)
        .map(|(p, a)| (p.name.as_str(), a.as_str()))
        .collect();
    if !schema.preconditions.iter().all(|l| literal_holds(l, &binding, state)) {
        return None;
    }
    let mut next = state.clone();
    for d in &schema.del {
        next.remove(&substitute(d, &binding));
    }
    for a in &schema.add {
        next.insert(substitute(a, &binding));
    }
    Some(next)
}

fn bindings<'a>(vars: &'a [TypedVar], objects: &'a [(String, String)]) -> Vec<HashMap<&'a str, &'a str>> {
    let mut out = vec![HashMap::new()];
    for v in vars {
        let mut next = Vec::new();
        for b in &out {
            for (name, ty) in objects {
                if type_ok(&v.type_name, ty) {
                    let mut b2 = b.clone();
                    b2.insert(v.name.as_str(), name.as_str());
                    next.push(b2);
                }
            }
        }
        out = next;
    }
    out
}

/// Existential goal check by enumerating every binding.
pub fn goal_holds(goal: &GoalFormula, objects: &[(String, String)], state: &BTreeSet<Atom>) -> bool {
    bindings(&goal.binder, objects)
        .iter()
        .any(|b| goal.body.iter().all(|l| literal_holds(l, b, state)))
}

/// Replays a plan on the lifted model and checks the goal at the end.
pub fn plan_reaches_goal(domain: &DomainDef, problem: &ProblemDef, plan: &[ActionCall]) -> bool {
    let mut state = problem.init.clone();
    for call in plan {
        match apply_lifted(domain, &state, call) {
            Some(s) => state = s,
            None => return false,
        }
    }
    goal_holds(&problem.goal, &problem.objects, &state)
}

struct Op {
    pre_pos: Vec<usize>,
    pre_neg: Vec<usize>,
    add: Vec<usize>,
    del: Vec<usize>,
}

/// Shortest plan length by brute-force grounding and breadth-first search.
pub fn naive_bfs_length(domain: &DomainDef, problem: &ProblemDef, max_states: usize) -> Option<Option<usize>> {
    let mut index: HashMap<Atom, usize> = HashMap::new();
    let mut intern = |a: Atom| {
        let n = index.len();
        *index.entry(a).or_insert(n)
    };
    let mut ops = Vec::new();
    for schema in &domain.actions {
        for b in bindings(&schema.params, &problem.objects) {
            if !schema
                .preconditions
                .iter()
                .filter(|l| l.predicate == "=")
                .all(|l| literal_holds(l, &b, &BTreeSet::new()))
            {
                continue;
            }
            let real = |ls: &[LiteralTemplate], positive: bool| -> Vec<Atom> {
                ls.iter()
                    .filter(|l| l.predicate != "=" && l.positive == positive)
                    .map(|l| substitute(l, &b))
                    .collect()
            };
            let pre_pos = real(&schema.preconditions, true);
            let pre_neg = real(&schema.preconditions, false);
            ops.push(Op {
                pre_pos: pre_pos.into_iter().map(&mut intern).collect(),
                pre_neg: pre_neg.into_iter().map(&mut intern).collect(),
                add: schema.add.iter().map(|l| intern(substitute(l, &b))).collect(),
                del: schema.del.iter().map(|l| intern(substitute(l, &b))).collect(),
            });
        }
    }
    let goals: Vec<(Vec<usize>, Vec<usize>)> = bindings(&problem.goal.binder, &problem.objects)
        .iter()
        .filter(|b| {
            problem
                .goal
                .body
                .iter()
                .filter(|l| l.predicate == "=")
                .all(|l| literal_holds(l, b, &BTreeSet::new()))
        })
        .map(|b| {
            let mut pick = |positive: bool| {
                problem
                    .goal
                    .body
                    .iter()
                    .filter(|l| l.predicate != "=" && l.positive == positive)
                    .map(|l| intern(substitute(l, b)))
                    .collect::<Vec<_>>()
            };
            (pick(true), pick(false))
        })
        .collect();
    let init: Vec<usize> = problem.init.iter().cloned().map(&mut intern).collect();
    let words = index.len().div_ceil(64);
    let has = |s: &[u64], i: usize| s[i / 64] >> (i % 64) & 1 == 1;
    let mut start = vec![0u64; words];
    for i in init {
        start[i / 64] |= 1 << (i % 64);
    }
    let is_goal = |s: &[u64]| {
        goals
            .iter()
            .any(|(p, n)| p.iter().all(|&i| has(s, i)) && !n.iter().any(|&i| has(s, i)))
    };
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut queue: VecDeque<(Vec<u64>, usize)> = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back((start, 0));
    while let Some((s, d)) = queue.pop_front() {
        if is_goal(&s) {
            return Some(Some(d));
        }
        for op in &ops {
            if op.pre_pos.iter().all(|&i| has(&s, i)) && !op.pre_neg.iter().any(|&i| has(&s, i)) {
                let mut t = s.clone();
                for &i in &op.del {
                    t[i / 64] &= !(1 << (i % 64));
                }
                for &i in &op.add {
                    t[i / 64] |= 1 << (i % 64);
                }
                if seen.len() >= max_states {
                    return None;
                }
                if seen.insert(t.clone()) {
                    queue.push_back((t, d + 1));
                }
            }
        }
    }
    Some(None)
}

const NAMES: [&str; 12] = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta", "iota", "kappa", "lam", "mu"];

fn name(rng: &mut impl Rng, prefix: &str) -> String {
    format!("{prefix}{}-{}", NAMES.choose(rng).unwrap(), rng.gen_range(0..100))
}

fn distinct_names(rng: &mut impl Rng, prefix: &str, count: std::ops::RangeInclusive<usize>) -> Vec<String> {
    let n = rng.gen_range(count);
    let mut out: Vec<String> = Vec::new();
    while out.len() < n {
        let s = name(rng, prefix);
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// A random typed STRIPS domain with negative preconditions and equality.
pub fn random_domain(rng: &mut impl Rng) -> DomainDef {
    let types = distinct_names(rng, "t", 1..=3);
    let type_decls: Vec<TypeDecl> = types
        .iter()
        .enumerate()
        .map(|(i, t)| TypeDecl {
            name: t.clone(),
            parent: if i > 0 && rng.gen_bool(0.3) { types[0].clone() } else { "object".into() },
        })
        .collect();
    let any_type = |rng: &mut dyn rand::RngCore| -> String {
        if rng.gen_bool(0.4) {
            "object".into()
        } else {
            types.choose(rng).unwrap().clone()
        }
    };
    let mut preds: Vec<PredicateDecl> = distinct_names(rng, "p", 2..=5)
        .into_iter()
        .map(|n| {
            let arity = rng.gen_range(0..=2);
            PredicateDecl {
                name: n,
                params: (0..arity).map(|i| TypedVar::new(format!("?x{i}"), any_type(rng))).collect(),
            }
        })
        .collect();
    if preds.iter().all(|p| !p.params.is_empty()) {
        preds[0].params.clear();
    }
    let actions = distinct_names(rng, "act", 1..=4)
        .into_iter()
        .map(|n| {
            let params: Vec<TypedVar> = (0..rng.gen_range(0..=3))
                .map(|i| TypedVar::new(format!("?v{i}"), any_type(rng)))
                .collect();
            let usable: Vec<&PredicateDecl> = preds
                .iter()
                .filter(|p| p.params.is_empty() || !params.is_empty())
                .collect();
            let lit = |rng: &mut dyn rand::RngCore, positive: bool| {
                let p = usable.choose(rng).unwrap();
                LiteralTemplate {
                    positive,
                    predicate: p.name.clone(),
                    args: p
                        .params
                        .iter()
                        .map(|_| Term::Var(params.choose(rng).unwrap().name.clone()))
                        .collect(),
                }
            };
            let mut preconditions: Vec<LiteralTemplate> = (0..rng.gen_range(0..=3))
                .map(|_| {
                    let positive = rng.gen_bool(0.7);
                    lit(rng, positive)
                })
                .collect();
            if params.len() >= 2 && rng.gen_bool(0.3) {
                preconditions.push(LiteralTemplate::neg(
                    "=",
                    vec![Term::Var(params[0].name.clone()), Term::Var(params[1].name.clone())],
                ));
            }
            let mut add: Vec<LiteralTemplate> = Vec::new();
            let mut del: Vec<LiteralTemplate> = Vec::new();
            for _ in 0..rng.gen_range(1..=3) {
                let l = lit(rng, true);
                if add.contains(&l) || del.contains(&l) {
                    continue;
                }
                if rng.gen_bool(0.6) {
                    add.push(l);
                } else {
                    del.push(l);
                }
            }
            ActionSchema {
                name: n,
                params,
                preconditions,
                add,
                del,
            }
        })
        .collect();
    DomainDef {
        name: name(rng, "dom"),
        requirements: vec![
            ":strips".into(),
            ":typing".into(),
            ":negative-preconditions".into(),
            ":equality".into(),
        ],
        types: type_decls,
        predicates: preds,
        actions,
    }
}

/// Every type-correct atom over `objects`.
pub fn all_atoms(domain: &DomainDef, objects: &[(String, String)]) -> Vec<Atom> {
    let mut out = Vec::new();
    for p in &domain.predicates {
        for b in bindings(&p.params, objects) {
            let args = p.params.iter().map(|v| b[v.name.as_str()].to_string());
            let atom = Atom::new(p.name.clone(), args);
            // Problem atoms must match declared types exactly.
            let exact = p.params.iter().zip(&atom.args).all(|(v, a)| {
                v.type_name == "object" || objects.iter().any(|(n, t)| n == a && *t == v.type_name)
            });
            if exact {
                out.push(atom);
            }
        }
    }
    out
}

/// Random objects and initial state; the goal is a random existential
/// formula (roundtrip use) over the domain.
pub fn random_problem(rng: &mut impl Rng, domain: &DomainDef) -> ProblemDef {
    let mut type_pool: Vec<String> = domain.types.iter().map(|t| t.name.clone()).collect();
    type_pool.push("object".into());
    let objects: Vec<(String, String)> = distinct_names(rng, "o", 1..=5)
        .into_iter()
        .map(|o| (o, type_pool.choose(rng).unwrap().clone()))
        .collect();
    let atoms = all_atoms(domain, &objects);
    let init: BTreeSet<Atom> = atoms.iter().filter(|_| rng.gen_bool(0.4)).cloned().collect();
    let binder: Vec<TypedVar> = (0..rng.gen_range(0..=2))
        .map(|i| TypedVar::new(format!("?g{i}"), type_pool.choose(rng).unwrap().clone()))
        .collect();
    let mut body = Vec::new();
    for _ in 0..rng.gen_range(0..=3) {
        let p = domain.predicates.choose(rng).unwrap();
        let args = p
            .params
            .iter()
            .map(|_| {
                if !binder.is_empty() && rng.gen_bool(0.6) {
                    Term::Var(binder.choose(rng).unwrap().name.clone())
                } else {
                    Term::Const(objects.choose(rng).unwrap().0.clone())
                }
            })
            .collect();
        body.push(LiteralTemplate {
            positive: rng.gen_bool(0.8),
            predicate: p.name.clone(),
            args,
        });
    }
    ProblemDef {
        name: name(rng, "prob"),
        domain_name: domain.name.clone(),
        objects,
        init,
        goal: GoalFormula { binder, body },
    }
}

/// Every applicable call in `state`, by enumerating parameter tuples.
pub fn applicable_calls(domain: &DomainDef, objects: &[(String, String)], state: &BTreeSet<Atom>) -> Vec<ActionCall> {
    let mut out = Vec::new();
    for schema in &domain.actions {
        for b in bindings(&schema.params, objects) {
            if schema.preconditions.iter().all(|l| literal_holds(l, &b, state)) {
                out.push(ActionCall::new(
                    schema.name.clone(),
                    schema.params.iter().map(|v| b[v.name.as_str()].to_string()),
                ));
            }
        }
    }
    out
}

/// A random problem whose goal is a conjunction of facts reached by a random
/// walk, so that most instances are solvable; some get an unreachable extra.
pub fn random_planning_problem(rng: &mut impl Rng) -> (DomainDef, ProblemDef) {
    loop {
        let domain = random_domain(rng);
        let mut problem = random_problem(rng, &domain);
        let mut state = problem.init.clone();
        for _ in 0..rng.gen_range(0..6) {
            let calls = applicable_calls(&domain, &problem.objects, &state);
            let Some(c) = calls.choose(rng) else { break };
            state = apply_lifted(&domain, &state, c).unwrap();
        }
        let mut body: Vec<LiteralTemplate> = Vec::new();
        let atoms = all_atoms(&domain, &problem.objects);
        if atoms.is_empty() {
            continue;
        }
        for _ in 0..rng.gen_range(1..=3) {
            let a = atoms.choose(rng).unwrap();
            let positive = if rng.gen_bool(0.9) { state.contains(a) } else { !state.contains(a) };
            let l = LiteralTemplate {
                positive,
                predicate: a.predicate.clone(),
                args: a.args.iter().map(|x| Term::Const(x.clone())).collect(),
            };
            if !body.contains(&l) {
                body.push(l);
            }
        }
        problem.goal = GoalFormula { binder: vec![], body };
        return (domain, problem);
    }
}
