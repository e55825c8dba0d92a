//! Typed-STRIPS PDDL subset: abstract syntax, parser and printer.
//!
//! The subset covers flat types under `object`, conjunctive preconditions
//! with negation and (in)equality, add/delete effects, and existential
//! conjunctive goals. Keywords match case-insensitively; identifiers keep
//! their source casing.

mod alfred;
mod parse;
mod print;
pub mod sexpr;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use alfred::{alfred_domain, ALFRED_DOMAIN, ALFRED_PREDICATES};
pub use parse::{parse_domain, parse_goal, parse_problem};
pub use print::{print_domain, print_goal, print_problem};

/// The root of the flat type hierarchy.
pub const ROOT_TYPE: &str = "object";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PddlError {
    #[error("unbalanced parentheses at byte {0}")]
    UnbalancedParens(usize),
    #[error("unknown section `{0}`")]
    UnknownSection(String),
    #[error("predicate `{0}` redeclared with a different arity")]
    ArityRedeclaration(String),
    #[error("predicate `{0}` declared twice")]
    DuplicatePredicate(String),
    #[error("undeclared object `{0}`")]
    UndeclaredObject(String),
    #[error("undeclared predicate `{0}`")]
    UndeclaredPredicate(String),
    #[error("predicate `{predicate}` expects {expected} arguments, got {found}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("object `{object}` of type `{found}` cannot fill a `{expected}` slot of `{predicate}`")]
    TypeMismatch {
        predicate: String,
        object: String,
        expected: String,
        found: String,
    },
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("variable `{0}` is not bound")]
    UnboundVariable(String),
    #[error("malformed binder: {0}")]
    MalformedBinder(String),
    #[error("invalid goal: {0}")]
    InvalidGoal(String),
    #[error("malformed expression at byte {position}: {message}")]
    Malformed { position: usize, message: String },
}

/// A variable with its declared type, e.g. `?o - object`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TypedVar {
    pub name: String,
    pub type_name: String,
}

impl TypedVar {
    pub fn new(name: impl Into<String>, type_name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            type_name: type_name.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDecl {
    pub name: String,
    pub params: Vec<TypedVar>,
}

impl PredicateDecl {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// An argument position inside a literal template.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn parse(token: &str) -> Self {
        if token.starts_with('?') {
            Term::Var(token.to_string())
        } else {
            Term::Const(token.to_string())
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The equality pseudo-predicate.
pub const EQUALITY: &str = "=";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LiteralTemplate {
    pub positive: bool,
    pub predicate: String,
    pub args: Vec<Term>,
}

impl LiteralTemplate {
    pub fn pos(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Self {
            positive: true,
            predicate: predicate.into(),
            args,
        }
    }

    pub fn neg(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Self {
            positive: false,
            predicate: predicate.into(),
            args,
        }
    }

    pub fn is_equality(&self) -> bool {
        self.predicate == EQUALITY
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedVar>,
    pub preconditions: Vec<LiteralTemplate>,
    /// Positive templates made true by the action.
    pub add: Vec<LiteralTemplate>,
    /// Positive templates made false by the action.
    pub del: Vec<LiteralTemplate>,
}

/// `(:goal (exists (<binder>) (and <body>)))`; an empty binder prints as a
/// bare conjunction.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GoalFormula {
    pub binder: Vec<TypedVar>,
    pub body: Vec<LiteralTemplate>,
}

impl GoalFormula {
    /// Number of binder variables per declared type, in first-seen order.
    pub fn type_multiplicities(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for v in &self.binder {
            match out.iter_mut().find(|(t, _)| *t == v.type_name) {
                Some((_, n)) => *n += 1,
                None => out.push((v.type_name.clone(), 1)),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDecl {
    pub name: String,
    pub parent: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainDef {
    pub name: String,
    pub requirements: Vec<String>,
    /// Declared subtypes of `object`. When empty the type universe is open:
    /// any identifier names a subtype of `object`.
    pub types: Vec<TypeDecl>,
    pub predicates: Vec<PredicateDecl>,
    pub actions: Vec<ActionSchema>,
}

impl DomainDef {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn has_type(&self, name: &str) -> bool {
        name == ROOT_TYPE || self.types.is_empty() || self.types.iter().any(|t| t.name == name)
    }

    /// Predicates never changed by any action effect.
    pub fn static_predicates(&self) -> BTreeSet<&str> {
        let touched: BTreeSet<&str> = self
            .actions
            .iter()
            .flat_map(|a| a.add.iter().chain(&a.del))
            .map(|l| l.predicate.as_str())
            .collect();
        self.predicates
            .iter()
            .map(|p| p.name.as_str())
            .filter(|p| !touched.contains(p))
            .collect()
    }
}

/// A ground atom over object names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<S: Into<String>>(predicate: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        Self {
            predicate: predicate.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    pub fn mentions(&self, object: &str) -> bool {
        self.args.iter().any(|a| a == object)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDef {
    pub name: String,
    pub domain_name: String,
    /// `(name, type)` in declaration order.
    pub objects: Vec<(String, String)>,
    pub init: BTreeSet<Atom>,
    pub goal: GoalFormula,
}

impl ProblemDef {
    pub fn object_type(&self, name: &str) -> Option<&str> {
        self.objects
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.as_str())
    }
}

/// A problem found in a goal formula by [`validate_goal`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoalViolation {
    UndeclaredPredicate(String),
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    UnboundVariable(String),
    DuplicateVariable(String),
    UnknownType(String),
}

impl fmt::Display for GoalViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalViolation::UndeclaredPredicate(p) => write!(f, "undeclared predicate `{p}`"),
            GoalViolation::ArityMismatch {
                predicate,
                expected,
                found,
            } => write!(f, "`{predicate}` takes {expected} arguments, got {found}"),
            GoalViolation::UnboundVariable(v) => write!(f, "variable `{v}` is not bound"),
            GoalViolation::DuplicateVariable(v) => write!(f, "variable `{v}` bound twice"),
            GoalViolation::UnknownType(t) => write!(f, "unknown type `{t}`"),
        }
    }
}

/// Checks predicates, arities, variable binding and types of a goal.
///
/// Semantically odd goals (a movable object asserted to be a receptacle)
/// pass; they surface later as unsolvable planning problems.
pub fn validate_goal(goal: &GoalFormula, domain: &DomainDef) -> Vec<GoalViolation> {
    let mut violations = Vec::new();
    let mut bound: Vec<&str> = Vec::new();
    for v in &goal.binder {
        if bound.contains(&v.name.as_str()) {
            violations.push(GoalViolation::DuplicateVariable(v.name.clone()));
        }
        bound.push(&v.name);
        if !domain.has_type(&v.type_name) {
            violations.push(GoalViolation::UnknownType(v.type_name.clone()));
        }
    }
    for lit in &goal.body {
        if lit.is_equality() {
            if lit.args.len() != 2 {
                violations.push(GoalViolation::ArityMismatch {
                    predicate: EQUALITY.into(),
                    expected: 2,
                    found: lit.args.len(),
                });
            }
        } else {
            match domain.predicate(&lit.predicate) {
                None => violations.push(GoalViolation::UndeclaredPredicate(lit.predicate.clone())),
                Some(decl) if decl.arity() != lit.args.len() => {
                    violations.push(GoalViolation::ArityMismatch {
                        predicate: lit.predicate.clone(),
                        expected: decl.arity(),
                        found: lit.args.len(),
                    })
                }
                Some(_) => {}
            }
        }
        for v in lit.variables() {
            if !bound.contains(&v) {
                let violation = GoalViolation::UnboundVariable(v.to_string());
                if !violations.contains(&violation) {
                    violations.push(violation);
                }
            }
        }
    }
    violations
}
