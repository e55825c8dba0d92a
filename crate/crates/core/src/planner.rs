//! Forward state-space search over a [`GroundProblem`].
//!
//! Two strategies: breadth-first search with a hashed closed set, which
//! returns shortest plans, and a best-first search ordered by
//! `(novelty, goal count, insertion order)` with width-2 novelty tables.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grounding::{applicable, apply_unchecked, ActionCall, AtomId, GroundProblem, State};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlannerError {
    #[error("search budget must be positive")]
    InvalidBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub max_expanded_nodes: usize,
    pub max_wall_time: Duration,
}

impl SearchBudget {
    pub fn new(max_expanded_nodes: usize, max_wall_time: Duration) -> Result<Self, PlannerError> {
        if max_expanded_nodes == 0 || max_wall_time.is_zero() {
            return Err(PlannerError::InvalidBudget);
        }
        Ok(Self {
            max_expanded_nodes,
            max_wall_time,
        })
    }

    /// Same wall time, node limit multiplied by `factor`.
    pub fn scaled(self, factor: usize) -> Self {
        Self {
            max_expanded_nodes: self.max_expanded_nodes.saturating_mul(factor),
            ..self
        }
    }
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            max_expanded_nodes: 100_000,
            max_wall_time: Duration::from_secs(5),
        }
    }
}

/// Indices into [`GroundProblem::actions`], in execution order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<usize>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn calls(&self, problem: &GroundProblem) -> Vec<ActionCall> {
        self.steps.iter().map(|&i| problem.actions[i].call()).collect()
    }

    pub fn render(&self, problem: &GroundProblem) -> String {
        self.steps
            .iter()
            .map(|&i| format!("{}\n", problem.actions[i]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Found(Plan),
    Unsolvable,
    BudgetExhausted { expanded: usize },
}

impl SearchOutcome {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            SearchOutcome::Found(p) => Some(p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    #[default]
    Bffs,
    Optimal,
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlannerKind::Bffs => "bffs",
            PlannerKind::Optimal => "optimal",
        })
    }
}

pub fn plan(problem: &GroundProblem, kind: PlannerKind, budget: SearchBudget) -> SearchOutcome {
    match kind {
        PlannerKind::Bffs => plan_bffs(problem, budget),
        PlannerKind::Optimal => plan_optimal(problem, budget),
    }
}

/// No disjunct can ever hold: some positive goal atom is neither initially
/// true nor added by any action.
fn relaxed_unreachable(problem: &GroundProblem) -> bool {
    let mut reach = problem.init.clone();
    for a in &problem.actions {
        for &x in &a.add {
            reach.insert(x);
        }
    }
    !problem
        .goal_positive_atoms()
        .any(|pos| pos.iter().all(|&x| reach.contains(x)))
}

struct Node {
    state: State,
    parent: u32,
    action: u32,
}

const ROOT: u32 = u32::MAX;

fn extract(nodes: &[Node], mut id: u32) -> Plan {
    let mut steps = Vec::new();
    while nodes[id as usize].parent != ROOT {
        steps.push(nodes[id as usize].action as usize);
        id = nodes[id as usize].parent;
    }
    steps.reverse();
    Plan { steps }
}

struct Clock {
    start: Instant,
    budget: SearchBudget,
}

impl Clock {
    fn exhausted(&self, expanded: usize) -> bool {
        expanded >= self.budget.max_expanded_nodes
            || (expanded.is_multiple_of(256) && self.start.elapsed() >= self.budget.max_wall_time)
    }
}

/// Breadth-first search; the returned plan is a shortest one.
pub fn plan_optimal(problem: &GroundProblem, budget: SearchBudget) -> SearchOutcome {
    if problem.goal_satisfied(&problem.init) {
        return SearchOutcome::Found(Plan::default());
    }
    if relaxed_unreachable(problem) {
        return SearchOutcome::Unsolvable;
    }
    let clock = Clock {
        start: Instant::now(),
        budget,
    };
    let mut nodes = vec![Node {
        state: problem.init.clone(),
        parent: ROOT,
        action: 0,
    }];
    let mut seen: HashMap<State, u32> = HashMap::new();
    seen.insert(problem.init.clone(), 0);
    let mut queue = VecDeque::from([0u32]);
    let mut expanded = 0usize;
    while let Some(id) = queue.pop_front() {
        if clock.exhausted(expanded) {
            return SearchOutcome::BudgetExhausted { expanded };
        }
        expanded += 1;
        for (ai, action) in problem.actions.iter().enumerate() {
            let state = &nodes[id as usize].state;
            if !applicable(state, action) {
                continue;
            }
            let next = apply_unchecked(state, action);
            if seen.contains_key(&next) {
                continue;
            }
            let child = nodes.len() as u32;
            let done = problem.goal_satisfied(&next);
            seen.insert(next.clone(), child);
            nodes.push(Node {
                state: next,
                parent: id,
                action: ai as u32,
            });
            if done {
                return SearchOutcome::Found(extract(&nodes, child));
            }
            queue.push_back(child);
        }
    }
    SearchOutcome::Unsolvable
}

/// Width-2 novelty tables over interned atoms.
struct Novelty {
    n: usize,
    singles: Vec<bool>,
    pairs: Vec<u64>,
}

impl Novelty {
    fn new(n: usize) -> Self {
        Self {
            n,
            singles: vec![false; n],
            pairs: vec![0; (n * n).div_ceil(64)],
        }
    }

    /// 1 if `atoms` holds a never-seen atom, 2 if a never-seen pair, else 3.
    /// Records everything in `atoms` as seen.
    fn evaluate(&mut self, atoms: &[AtomId]) -> u8 {
        let mut width = 3;
        for &a in atoms {
            let seen = &mut self.singles[a.index()];
            if !*seen {
                *seen = true;
                width = 1;
            }
        }
        for (i, &a) in atoms.iter().enumerate() {
            for &b in &atoms[i + 1..] {
                let bit = a.index() * self.n + b.index();
                let (w, m) = (bit / 64, 1u64 << (bit % 64));
                if self.pairs[w] & m == 0 {
                    self.pairs[w] |= m;
                    width = width.min(2);
                }
            }
        }
        width
    }
}

/// Best-first search ordered by `(novelty, goal count, insertion order)`.
///
/// Novelty only orders the open list; nothing is pruned apart from exact
/// duplicates, so the search is complete within its budget.
pub fn plan_bffs(problem: &GroundProblem, budget: SearchBudget) -> SearchOutcome {
    if problem.goal_satisfied(&problem.init) {
        return SearchOutcome::Found(Plan::default());
    }
    if relaxed_unreachable(problem) {
        return SearchOutcome::Unsolvable;
    }
    let clock = Clock {
        start: Instant::now(),
        budget,
    };
    let mut novelty = Novelty::new(problem.atom_count());
    let mut scratch: Vec<AtomId> = problem.init.iter().collect();
    novelty.evaluate(&scratch);

    let mut nodes = vec![Node {
        state: problem.init.clone(),
        parent: ROOT,
        action: 0,
    }];
    let mut seen: HashMap<State, u32> = HashMap::new();
    seen.insert(problem.init.clone(), 0);
    let mut open = BinaryHeap::new();
    open.push(Reverse((1u8, problem.goal_count(&problem.init), 0u32)));
    let mut expanded = 0usize;
    while let Some(Reverse((_, _, id))) = open.pop() {
        if clock.exhausted(expanded) {
            return SearchOutcome::BudgetExhausted { expanded };
        }
        expanded += 1;
        for (ai, action) in problem.actions.iter().enumerate() {
            let state = &nodes[id as usize].state;
            if !applicable(state, action) {
                continue;
            }
            let next = apply_unchecked(state, action);
            if seen.contains_key(&next) {
                continue;
            }
            let child = nodes.len() as u32;
            if problem.goal_satisfied(&next) {
                nodes.push(Node {
                    state: next,
                    parent: id,
                    action: ai as u32,
                });
                return SearchOutcome::Found(extract(&nodes, child));
            }
            scratch.clear();
            scratch.extend(next.iter());
            let width = novelty.evaluate(&scratch);
            let h = problem.goal_count(&next);
            seen.insert(next.clone(), child);
            nodes.push(Node {
                state: next,
                parent: id,
                action: ai as u32,
            });
            open.push(Reverse((width, h, child)));
        }
    }
    SearchOutcome::Unsolvable
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanCheck {
    Valid,
    /// Step `step` was not applicable in its predecessor state.
    Inapplicable { step: usize },
    /// Every step applied but the final state misses the goal.
    GoalNotReached,
}

impl PlanCheck {
    pub fn is_valid(&self) -> bool {
        matches!(self, PlanCheck::Valid)
    }
}

/// Simulates `plan` from `init` and checks the goal at the end.
pub fn validate_plan(problem: &GroundProblem, init: &State, plan: &Plan) -> PlanCheck {
    let mut state = init.clone();
    for (step, &ai) in plan.steps.iter().enumerate() {
        let Some(action) = problem.actions.get(ai) else {
            return PlanCheck::Inapplicable { step };
        };
        if !applicable(&state, action) {
            return PlanCheck::Inapplicable { step };
        }
        state = apply_unchecked(&state, action);
    }
    if problem.goal_satisfied(&state) {
        PlanCheck::Valid
    } else {
        PlanCheck::GoalNotReached
    }
}
