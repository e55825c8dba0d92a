//! Instantiates action schemas and existential goals over a problem's
//! objects, producing an interned transition system for search.
//!
//! Actions are grounded by a relaxed-reachability fixpoint: a binding is
//! emitted only when every positive precondition is reachable while
//! ignoring deletes, and static negative preconditions hold in the initial
//! state. The reachable state space is unchanged by this pruning.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{
    ActionSchema, Atom, DomainDef, GoalFormula, LiteralTemplate, ProblemDef, Term, ROOT_TYPE,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroundingError {
    #[error("goal cannot be grounded: {0}")]
    GoalUngroundable(String),
    #[error("action {0} is not applicable")]
    InapplicableAction(String),
    #[error("unknown action schema `{0}`")]
    UnknownAction(String),
    #[error("action `{name}` takes {expected} arguments, got {found}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("atom {0} is outside the grounded universe")]
    UnknownAtom(Atom),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomId(pub u32);

impl AtomId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A set of atoms as a fixed-width bitset over the interned universe.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    words: Box<[u64]>,
}

impl State {
    pub fn empty(universe: usize) -> Self {
        Self {
            words: vec![0; universe.div_ceil(64)].into_boxed_slice(),
        }
    }

    #[inline]
    pub fn contains(&self, id: AtomId) -> bool {
        let i = id.index();
        self.words
            .get(i / 64)
            .is_some_and(|w| w & (1u64 << (i % 64)) != 0)
    }

    #[inline]
    pub fn insert(&mut self, id: AtomId) {
        let i = id.index();
        self.words[i / 64] |= 1u64 << (i % 64);
    }

    #[inline]
    pub fn remove(&mut self, id: AtomId) {
        let i = id.index();
        self.words[i / 64] &= !(1u64 << (i % 64));
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Ids of the atoms in the set, ascending.
    pub fn iter(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros();
                bits &= bits - 1;
                Some(AtomId((wi * 64) as u32 + b))
            })
        })
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|a| a.0)).finish()
    }
}

/// A fully instantiated action over interned atoms. Unit cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub pre_pos: Vec<AtomId>,
    pub pre_neg: Vec<AtomId>,
    pub add: Vec<AtomId>,
    pub del: Vec<AtomId>,
}

impl GroundAction {
    pub fn cost(&self) -> u32 {
        1
    }

    pub fn call(&self) -> ActionCall {
        ActionCall {
            name: self.name.clone(),
            args: self.args.clone(),
        }
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// An action by name and arguments, as sent to the environment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionCall {
    pub name: String,
    pub args: Vec<String>,
}

impl ActionCall {
    pub fn new<S: Into<String>>(name: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for ActionCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// One schema instantiated over concrete objects, with atoms spelled out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstantiatedAction {
    pub call: ActionCall,
    pub pre_pos: Vec<Atom>,
    pub pre_neg: Vec<Atom>,
    /// False when an (in)equality precondition fails for these arguments.
    pub equalities_hold: bool,
    pub add: Vec<Atom>,
    pub del: Vec<Atom>,
}

impl InstantiatedAction {
    pub fn applicable(&self, state: &BTreeSet<Atom>) -> bool {
        self.equalities_hold
            && self.pre_pos.iter().all(|a| state.contains(a))
            && !self.pre_neg.iter().any(|a| state.contains(a))
    }

    /// `(s \ del) ∪ add`.
    pub fn apply_to(&self, state: &mut BTreeSet<Atom>) {
        for a in &self.del {
            state.remove(a);
        }
        for a in &self.add {
            state.insert(a.clone());
        }
    }
}

fn substitute(lit: &LiteralTemplate, binding: &HashMap<&str, &str>) -> Atom {
    Atom {
        predicate: lit.predicate.clone(),
        args: lit
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => binding.get(v.as_str()).copied().unwrap_or(v.as_str()).to_string(),
                Term::Const(c) => c.clone(),
            })
            .collect(),
    }
}

fn equality_holds(lit: &LiteralTemplate, binding: &HashMap<&str, &str>) -> bool {
    let a = substitute(lit, binding);
    (a.args[0] == a.args[1]) == lit.positive
}

fn instantiate_schema(schema: &ActionSchema, args: &[String]) -> InstantiatedAction {
    let binding: HashMap<&str, &str> = schema
        .params
        .iter()
        .map(|p| p.name.as_str())
        .zip(args.iter().map(String::as_str))
        .collect();
    let mut out = InstantiatedAction {
        call: ActionCall::new(schema.name.clone(), args.iter().cloned()),
        pre_pos: Vec::new(),
        pre_neg: Vec::new(),
        equalities_hold: true,
        add: schema.add.iter().map(|l| substitute(l, &binding)).collect(),
        del: Vec::new(),
    };
    for p in &schema.preconditions {
        if p.is_equality() {
            out.equalities_hold &= equality_holds(p, &binding);
        } else if p.positive {
            out.pre_pos.push(substitute(p, &binding));
        } else {
            out.pre_neg.push(substitute(p, &binding));
        }
    }
    out.del = schema
        .del
        .iter()
        .map(|l| substitute(l, &binding))
        .filter(|a| !out.add.contains(a))
        .collect();
    out
}

/// Instantiates one named schema over the given arguments.
pub fn instantiate_action(
    domain: &DomainDef,
    call: &ActionCall,
) -> Result<InstantiatedAction, GroundingError> {
    let schema = domain
        .action(&call.name)
        .ok_or_else(|| GroundingError::UnknownAction(call.name.clone()))?;
    if schema.params.len() != call.args.len() {
        return Err(GroundingError::ArityMismatch {
            name: call.name.clone(),
            expected: schema.params.len(),
            found: call.args.len(),
        });
    }
    Ok(instantiate_schema(schema, &call.args))
}

/// A conjunction produced by one binding of the goal's existential variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalDisjunct {
    pub binding: Vec<(String, String)>,
    pub pos: Vec<Atom>,
    pub neg: Vec<Atom>,
}

impl GoalDisjunct {
    pub fn satisfied_by(&self, state: &BTreeSet<Atom>) -> bool {
        self.pos.iter().all(|a| state.contains(a)) && !self.neg.iter().any(|a| state.contains(a))
    }
}

/// A goal in disjunctive normal form over object bindings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundGoal {
    pub disjuncts: Vec<GoalDisjunct>,
}

impl GroundGoal {
    pub fn satisfied_by(&self, state: &BTreeSet<Atom>) -> bool {
        self.disjuncts.iter().any(|d| d.satisfied_by(state))
    }
}

fn type_matches(object_type: &str, wanted: &str) -> bool {
    wanted == ROOT_TYPE || object_type == wanted
}

/// Enumerates every type-consistent binding of the goal's variables that
/// respects its (in)equality literals.
pub fn ground_goal(goal: &GoalFormula, objects: &[(String, String)]) -> Result<GroundGoal, GroundingError> {
    let mut domains: Vec<Vec<&str>> = Vec::with_capacity(goal.binder.len());
    for v in &goal.binder {
        let candidates: Vec<&str> = objects
            .iter()
            .filter(|(_, t)| type_matches(t, &v.type_name))
            .map(|(n, _)| n.as_str())
            .collect();
        if candidates.is_empty() {
            return Err(GroundingError::GoalUngroundable(format!(
                "no object of type `{}` for {}",
                v.type_name, v.name
            )));
        }
        domains.push(candidates);
    }
    let mut disjuncts = Vec::new();
    let mut choice = vec![0usize; domains.len()];
    'outer: loop {
        let binding: HashMap<&str, &str> = goal
            .binder
            .iter()
            .zip(&choice)
            .zip(&domains)
            .map(|((v, &i), d)| (v.name.as_str(), d[i]))
            .collect();
        if goal
            .body
            .iter()
            .filter(|l| l.is_equality())
            .all(|l| equality_holds(l, &binding))
        {
            let mut d = GoalDisjunct {
                binding: goal
                    .binder
                    .iter()
                    .map(|v| (v.name.clone(), binding[v.name.as_str()].to_string()))
                    .collect(),
                pos: Vec::new(),
                neg: Vec::new(),
            };
            for l in goal.body.iter().filter(|l| !l.is_equality()) {
                let atom = substitute(l, &binding);
                let side = if l.positive { &mut d.pos } else { &mut d.neg };
                if !side.contains(&atom) {
                    side.push(atom);
                }
            }
            disjuncts.push(d);
        }
        // odometer increment, last variable fastest
        for k in (0..choice.len()).rev() {
            choice[k] += 1;
            if choice[k] < domains[k].len() {
                continue 'outer;
            }
            choice[k] = 0;
        }
        break;
    }
    if disjuncts.is_empty() {
        return Err(GroundingError::GoalUngroundable(
            "no binding satisfies the goal's equality constraints".into(),
        ));
    }
    Ok(GroundGoal { disjuncts })
}

#[derive(Debug, Clone)]
struct CompiledDisjunct {
    pos: Vec<AtomId>,
    neg: Vec<AtomId>,
}

/// The ground search space of one planning problem.
#[derive(Debug, Clone)]
pub struct GroundProblem {
    atoms: Vec<Atom>,
    index: HashMap<Atom, AtomId>,
    pub objects: Vec<(String, String)>,
    pub init: State,
    pub actions: Vec<GroundAction>,
    pub goal: GroundGoal,
    compiled_goal: Vec<CompiledDisjunct>,
}

struct Interner {
    atoms: Vec<Atom>,
    index: HashMap<Atom, AtomId>,
}

impl Interner {
    fn intern(&mut self, atom: &Atom) -> AtomId {
        if let Some(&id) = self.index.get(atom) {
            return id;
        }
        let id = AtomId(self.atoms.len() as u32);
        self.atoms.push(atom.clone());
        self.index.insert(atom.clone(), id);
        id
    }
}

/// Enumerates bindings of `schema` whose positive preconditions are in
/// `reach` and whose static negative preconditions hold in `init`.
fn reachable_bindings(
    schema: &ActionSchema,
    reach_by_pred: &HashMap<&str, Vec<&Atom>>,
    init: &BTreeSet<Atom>,
    statics: &BTreeSet<&str>,
    objects: &[(String, String)],
    out: &mut Vec<Vec<String>>,
) {
    let positives: Vec<&LiteralTemplate> = schema
        .preconditions
        .iter()
        .filter(|l| l.positive && !l.is_equality())
        .collect();
    let mut binding: HashMap<&str, &str> = HashMap::new();
    join(schema, &positives, 0, reach_by_pred, init, statics, objects, &mut binding, out);
}

#[allow(clippy::too_many_arguments)]
fn join<'a>(
    schema: &'a ActionSchema,
    positives: &[&'a LiteralTemplate],
    depth: usize,
    reach_by_pred: &HashMap<&str, Vec<&'a Atom>>,
    init: &BTreeSet<Atom>,
    statics: &BTreeSet<&str>,
    objects: &'a [(String, String)],
    binding: &mut HashMap<&'a str, &'a str>,
    out: &mut Vec<Vec<String>>,
) {
    if depth == positives.len() {
        complete_free(schema, 0, init, statics, objects, binding, out);
        return;
    }
    let lit = positives[depth];
    let Some(candidates) = reach_by_pred.get(lit.predicate.as_str()) else {
        return;
    };
    for atom in candidates {
        let mut newly = Vec::new();
        let mut ok = true;
        for (term, value) in lit.args.iter().zip(&atom.args) {
            match term {
                Term::Const(c) => ok &= c == value,
                Term::Var(v) => match binding.get(v.as_str()) {
                    Some(bound) => ok &= *bound == value,
                    None => {
                        binding.insert(v.as_str(), value.as_str());
                        newly.push(v.as_str());
                    }
                },
            }
            if !ok {
                break;
            }
        }
        if ok {
            join(schema, positives, depth + 1, reach_by_pred, init, statics, objects, binding, out);
        }
        for v in newly {
            binding.remove(v);
        }
    }
}

fn complete_free<'a>(
    schema: &'a ActionSchema,
    param: usize,
    init: &BTreeSet<Atom>,
    statics: &BTreeSet<&str>,
    objects: &'a [(String, String)],
    binding: &mut HashMap<&'a str, &'a str>,
    out: &mut Vec<Vec<String>>,
) {
    if param == schema.params.len() {
        // type check of join-bound variables, then equality and static negatives
        let typed_ok = schema.params.iter().all(|p| {
            let value = binding[p.name.as_str()];
            objects
                .iter()
                .any(|(n, t)| n == value && type_matches(t, &p.type_name))
        });
        if !typed_ok {
            return;
        }
        for l in &schema.preconditions {
            if l.is_equality() {
                if !equality_holds(l, binding) {
                    return;
                }
            } else if !l.positive
                && statics.contains(l.predicate.as_str())
                && init.contains(&substitute(l, binding))
            {
                return;
            }
        }
        out.push(
            schema
                .params
                .iter()
                .map(|p| binding[p.name.as_str()].to_string())
                .collect(),
        );
        return;
    }
    let p = &schema.params[param];
    if binding.contains_key(p.name.as_str()) {
        complete_free(schema, param + 1, init, statics, objects, binding, out);
        return;
    }
    for (name, ty) in objects {
        if type_matches(ty, &p.type_name) {
            binding.insert(p.name.as_str(), name.as_str());
            complete_free(schema, param + 1, init, statics, objects, binding, out);
        }
    }
    binding.remove(p.name.as_str());
}

/// Grounds `problem` against `domain`.
pub fn ground_problem(domain: &DomainDef, problem: &ProblemDef) -> Result<GroundProblem, GroundingError> {
    let goal = ground_goal(&problem.goal, &problem.objects)?;
    let statics = domain.static_predicates();

    let mut reach: BTreeSet<Atom> = problem.init.clone();
    let mut emitted: BTreeMap<(usize, Vec<String>), InstantiatedAction> = BTreeMap::new();
    loop {
        let mut by_pred: HashMap<&str, Vec<&Atom>> = HashMap::new();
        for a in &reach {
            by_pred.entry(a.predicate.as_str()).or_default().push(a);
        }
        let mut fresh = Vec::new();
        for (si, schema) in domain.actions.iter().enumerate() {
            let mut bindings = Vec::new();
            reachable_bindings(schema, &by_pred, &problem.init, &statics, &problem.objects, &mut bindings);
            for args in bindings {
                let key = (si, args);
                if !emitted.contains_key(&key) {
                    fresh.push(key);
                }
            }
        }
        drop(by_pred);
        if fresh.is_empty() {
            break;
        }
        let mut grew = false;
        for key in fresh {
            let inst = instantiate_schema(&domain.actions[key.0], &key.1);
            for a in &inst.add {
                grew |= reach.insert(a.clone());
            }
            emitted.insert(key, inst);
        }
        if !grew {
            // new actions but no new atoms: one more pass cannot find more
            break;
        }
    }

    let mut interner = Interner {
        atoms: Vec::new(),
        index: HashMap::new(),
    };
    for a in &problem.init {
        interner.intern(a);
    }
    let mut insts: Vec<InstantiatedAction> = emitted.into_values().collect();
    insts.sort_by(|a, b| a.call.cmp(&b.call));
    let actions: Vec<GroundAction> = insts
        .iter()
        .map(|inst| GroundAction {
            name: inst.call.name.clone(),
            args: inst.call.args.clone(),
            pre_pos: inst.pre_pos.iter().map(|a| interner.intern(a)).collect(),
            pre_neg: inst.pre_neg.iter().map(|a| interner.intern(a)).collect(),
            add: inst.add.iter().map(|a| interner.intern(a)).collect(),
            del: inst.del.iter().map(|a| interner.intern(a)).collect(),
        })
        .collect();
    let compiled_goal = goal
        .disjuncts
        .iter()
        .map(|d| CompiledDisjunct {
            pos: d.pos.iter().map(|a| interner.intern(a)).collect(),
            neg: d.neg.iter().map(|a| interner.intern(a)).collect(),
        })
        .collect();
    let mut init = State::empty(interner.atoms.len());
    for a in &problem.init {
        init.insert(interner.index[a]);
    }
    Ok(GroundProblem {
        atoms: interner.atoms,
        index: interner.index,
        objects: problem.objects.clone(),
        init,
        actions,
        goal,
        compiled_goal,
    })
}

impl GroundProblem {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom(&self, id: AtomId) -> &Atom {
        &self.atoms[id.index()]
    }

    pub fn atom_id(&self, atom: &Atom) -> Option<AtomId> {
        self.index.get(atom).copied()
    }

    pub fn empty_state(&self) -> State {
        State::empty(self.atoms.len())
    }

    pub fn state_from_atoms<'a>(
        &self,
        atoms: impl IntoIterator<Item = &'a Atom>,
    ) -> Result<State, GroundingError> {
        let mut s = self.empty_state();
        for a in atoms {
            let id = self
                .atom_id(a)
                .ok_or_else(|| GroundingError::UnknownAtom(a.clone()))?;
            s.insert(id);
        }
        Ok(s)
    }

    pub fn atoms_of(&self, state: &State) -> BTreeSet<Atom> {
        state.iter().map(|id| self.atom(id).clone()).collect()
    }

    pub fn goal_satisfied(&self, state: &State) -> bool {
        self.compiled_goal.iter().any(|d| {
            d.pos.iter().all(|&a| state.contains(a)) && !d.neg.iter().any(|&a| state.contains(a))
        })
    }

    /// Minimum over disjuncts of the number of unsatisfied goal literals.
    pub fn goal_count(&self, state: &State) -> usize {
        self.compiled_goal
            .iter()
            .map(|d| {
                d.pos.iter().filter(|&&a| !state.contains(a)).count()
                    + d.neg.iter().filter(|&&a| state.contains(a)).count()
            })
            .min()
            .unwrap_or(0)
    }

    /// Positive goal atoms per disjunct.
    pub fn goal_positive_atoms(&self) -> impl Iterator<Item = &[AtomId]> {
        self.compiled_goal.iter().map(|d| d.pos.as_slice())
    }

    pub fn find_action(&self, call: &ActionCall) -> Option<usize> {
        self.actions
            .binary_search_by(|a| (a.name.as_str(), a.args.as_slice()).cmp(&(call.name.as_str(), call.args.as_slice())))
            .ok()
    }

    /// Text dump of the ground action set, one action per line.
    pub fn dump_actions(&self) -> String {
        let fmt_set = |ids: &[AtomId]| {
            ids.iter()
                .map(|&id| self.atom(id).to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = String::new();
        for a in &self.actions {
            let _ = writeln!(
                out,
                "{a} pre+[{}] pre-[{}] add[{}] del[{}]",
                fmt_set(&a.pre_pos),
                fmt_set(&a.pre_neg),
                fmt_set(&a.add),
                fmt_set(&a.del)
            );
        }
        out
    }
}

#[inline]
pub fn applicable(state: &State, action: &GroundAction) -> bool {
    action.pre_pos.iter().all(|&a| state.contains(a)) && !action.pre_neg.iter().any(|&a| state.contains(a))
}

/// `(s \ del) ∪ add`; fails when the action is not applicable.
pub fn apply(state: &State, action: &GroundAction) -> Result<State, GroundingError> {
    if !applicable(state, action) {
        return Err(GroundingError::InapplicableAction(action.to_string()));
    }
    Ok(apply_unchecked(state, action))
}

#[inline]
pub(crate) fn apply_unchecked(state: &State, action: &GroundAction) -> State {
    let mut next = state.clone();
    for &d in &action.del {
        next.remove(d);
    }
    for &a in &action.add {
        next.insert(a);
    }
    next
}

/// Whether some disjunct of the problem's goal holds in `state`.
pub fn goal_satisfied(problem: &GroundProblem, state: &State) -> bool {
    problem.goal_satisfied(state)
}
