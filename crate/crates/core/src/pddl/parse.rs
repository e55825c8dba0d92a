use std::collections::BTreeSet;

use super::sexpr::{read_one, Sexp};
use super::{
    validate_goal, ActionSchema, Atom, DomainDef, GoalFormula, GoalViolation, LiteralTemplate,
    PddlError, PredicateDecl, ProblemDef, Term, TypeDecl, TypedVar, EQUALITY, ROOT_TYPE,
};

fn malformed(at: &Sexp, message: impl Into<String>) -> PddlError {
    PddlError::Malformed {
        position: at.position(),
        message: message.into(),
    }
}

fn expect_list<'a>(e: &'a Sexp, what: &str) -> Result<&'a [Sexp], PddlError> {
    e.as_list()
        .ok_or_else(|| malformed(e, format!("expected a list for {what}")))
}

fn expect_atom<'a>(e: &'a Sexp, what: &str) -> Result<&'a str, PddlError> {
    e.as_atom()
        .ok_or_else(|| malformed(e, format!("expected an identifier for {what}")))
}

/// Parses `a b - t c` style typed lists. Untyped names default to `object`.
fn typed_list(items: &[Sexp]) -> Result<Vec<(String, String)>, PddlError> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let tok = expect_atom(&items[i], "typed list entry")?;
        if tok == "-" {
            let ty = items
                .get(i + 1)
                .ok_or_else(|| malformed(&items[i], "dangling `-` in typed list"))?;
            let ty = expect_atom(ty, "type name")?;
            if pending.is_empty() {
                return Err(malformed(&items[i], "type given without names"));
            }
            out.extend(pending.drain(..).map(|n| (n, ty.to_string())));
            i += 2;
        } else {
            pending.push(tok.to_string());
            i += 1;
        }
    }
    out.extend(pending.into_iter().map(|n| (n, ROOT_TYPE.to_string())));
    Ok(out)
}

fn typed_vars(items: &[Sexp]) -> Result<Vec<TypedVar>, PddlError> {
    typed_list(items)?
        .into_iter()
        .map(|(n, t)| {
            if n.starts_with('?') && n.len() > 1 {
                Ok(TypedVar::new(n, t))
            } else {
                Err(PddlError::MalformedBinder(format!("`{n}` is not a variable")))
            }
        })
        .collect()
}

/// `(p a b)` or `(= a b)`.
fn atom_template(e: &Sexp, positive: bool) -> Result<LiteralTemplate, PddlError> {
    let items = expect_list(e, "atom")?;
    let (head, rest) = items
        .split_first()
        .ok_or_else(|| malformed(e, "empty atom"))?;
    let predicate = expect_atom(head, "predicate name")?;
    if predicate.eq_ignore_ascii_case("and")
        || predicate.eq_ignore_ascii_case("not")
        || predicate.eq_ignore_ascii_case("exists")
    {
        return Err(malformed(e, format!("`{predicate}` not allowed here")));
    }
    let args = rest
        .iter()
        .map(|a| expect_atom(a, "argument").map(Term::parse))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LiteralTemplate {
        positive,
        predicate: predicate.to_string(),
        args,
    })
}

/// A possibly negated atom.
fn literal(e: &Sexp) -> Result<LiteralTemplate, PddlError> {
    let items = expect_list(e, "literal")?;
    if e.head().is_some_and(|h| h.eq_ignore_ascii_case("not")) {
        if items.len() != 2 {
            return Err(malformed(e, "`not` takes exactly one argument"));
        }
        atom_template(&items[1], false)
    } else {
        atom_template(e, true)
    }
}

/// Flattens nested `and` into a literal list.
fn conjunction(e: &Sexp, out: &mut Vec<LiteralTemplate>) -> Result<(), PddlError> {
    let items = expect_list(e, "formula")?;
    if items.is_empty() {
        return Ok(());
    }
    if e.head().is_some_and(|h| h.eq_ignore_ascii_case("and")) {
        for sub in &items[1..] {
            conjunction(sub, out)?;
        }
        Ok(())
    } else {
        out.push(literal(e)?);
        Ok(())
    }
}

fn check_literal(
    lit: &LiteralTemplate,
    domain_predicates: &[PredicateDecl],
    bound: &[TypedVar],
) -> Result<(), PddlError> {
    if lit.is_equality() {
        if lit.args.len() != 2 {
            return Err(PddlError::ArityMismatch {
                predicate: EQUALITY.into(),
                expected: 2,
                found: lit.args.len(),
            });
        }
    } else {
        let decl = domain_predicates
            .iter()
            .find(|p| p.name == lit.predicate)
            .ok_or_else(|| PddlError::UndeclaredPredicate(lit.predicate.clone()))?;
        if decl.arity() != lit.args.len() {
            return Err(PddlError::ArityMismatch {
                predicate: lit.predicate.clone(),
                expected: decl.arity(),
                found: lit.args.len(),
            });
        }
    }
    for v in lit.variables() {
        if !bound.iter().any(|b| b.name == v) {
            return Err(PddlError::UnboundVariable(v.to_string()));
        }
    }
    Ok(())
}

fn parse_action(items: &[Sexp], whole: &Sexp, predicates: &[PredicateDecl]) -> Result<ActionSchema, PddlError> {
    let name = items
        .get(1)
        .ok_or_else(|| malformed(whole, "action without a name"))
        .and_then(|n| expect_atom(n, "action name"))?;
    let mut params = Vec::new();
    let mut preconditions = Vec::new();
    let mut effects = Vec::new();
    let mut i = 2;
    while i < items.len() {
        let key = expect_atom(&items[i], "action field")?;
        let value = items
            .get(i + 1)
            .ok_or_else(|| malformed(&items[i], format!("missing value for {key}")))?;
        match key.to_ascii_lowercase().as_str() {
            ":parameters" => params = typed_vars(expect_list(value, "parameters")?)?,
            ":precondition" => conjunction(value, &mut preconditions)?,
            ":effect" => conjunction(value, &mut effects)?,
            other => return Err(PddlError::UnknownSection(other.to_string())),
        }
        i += 2;
    }
    for p in &preconditions {
        check_literal(p, predicates, &params)?;
    }
    let mut add = Vec::new();
    let mut del = Vec::new();
    for e in effects {
        if e.is_equality() {
            return Err(malformed(whole, "equality cannot be an effect"));
        }
        check_literal(&e, predicates, &params)?;
        if e.positive {
            add.push(e);
        } else {
            del.push(LiteralTemplate { positive: true, ..e });
        }
    }
    Ok(ActionSchema {
        name: name.to_string(),
        params,
        preconditions,
        add,
        del,
    })
}

/// Returns the name from a `(domain NAME)` / `(problem NAME)` header.
fn header_name<'a>(e: &'a Sexp, kind: &str) -> Result<&'a str, PddlError> {
    let items = expect_list(e, kind)?;
    if items.len() != 2 || !items[0].is_keyword(kind) {
        return Err(malformed(e, format!("expected ({kind} <name>)")));
    }
    expect_atom(&items[1], "name")
}

fn define_body<'a>(root: &'a Sexp, kind: &str) -> Result<(&'a str, &'a [Sexp]), PddlError> {
    let items = expect_list(root, "define")?;
    if items.len() < 2 || !items[0].is_keyword("define") {
        return Err(malformed(root, "expected (define ...)"));
    }
    Ok((header_name(&items[1], kind)?, &items[2..]))
}

pub fn parse_domain(text: &str) -> Result<DomainDef, PddlError> {
    let root = read_one(text)?;
    let (name, sections) = define_body(&root, "domain")?;
    let mut domain = DomainDef {
        name: name.to_string(),
        requirements: Vec::new(),
        types: Vec::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
    };
    let mut action_exprs = Vec::new();
    for section in sections {
        let items = expect_list(section, "domain section")?;
        let head = section
            .head()
            .ok_or_else(|| malformed(section, "section without a keyword"))?;
        match head.to_ascii_lowercase().as_str() {
            ":requirements" => {
                for r in &items[1..] {
                    domain.requirements.push(expect_atom(r, "requirement")?.to_string());
                }
            }
            ":types" => {
                for (name, parent) in typed_list(&items[1..])? {
                    domain.types.push(TypeDecl { name, parent });
                }
            }
            ":predicates" => {
                for p in &items[1..] {
                    let decl_items = expect_list(p, "predicate declaration")?;
                    let (pname, params) = decl_items
                        .split_first()
                        .ok_or_else(|| malformed(p, "empty predicate declaration"))?;
                    let pname = expect_atom(pname, "predicate name")?;
                    let params = typed_vars(params)?;
                    if let Some(existing) = domain.predicate(pname) {
                        return Err(if existing.arity() != params.len() {
                            PddlError::ArityRedeclaration(pname.to_string())
                        } else {
                            PddlError::DuplicatePredicate(pname.to_string())
                        });
                    }
                    domain.predicates.push(PredicateDecl {
                        name: pname.to_string(),
                        params,
                    });
                }
            }
            ":action" => action_exprs.push(section),
            other => return Err(PddlError::UnknownSection(other.to_string())),
        }
    }
    for t in &domain.types {
        if t.parent != ROOT_TYPE && !domain.types.iter().any(|o| o.name == t.parent) {
            return Err(PddlError::UnknownType(t.parent.clone()));
        }
    }
    for expr in action_exprs {
        let action = parse_action(expr.as_list().unwrap_or_default(), expr, &domain.predicates)?;
        domain.actions.push(action);
    }
    Ok(domain)
}

fn goal_formula(e: &Sexp) -> Result<GoalFormula, PddlError> {
    if e.head().is_some_and(|h| h.eq_ignore_ascii_case("exists")) {
        let items = expect_list(e, "exists")?;
        if items.len() != 3 {
            return Err(PddlError::MalformedBinder(
                "exists takes a variable list and one formula".into(),
            ));
        }
        let binder_items = items[1]
            .as_list()
            .ok_or_else(|| PddlError::MalformedBinder("variable list must be parenthesised".into()))?;
        let binder = typed_vars(binder_items)?;
        let mut body = Vec::new();
        goal_body(&items[2], &mut body)?;
        Ok(GoalFormula { binder, body })
    } else {
        let mut body = Vec::new();
        goal_body(e, &mut body)?;
        Ok(GoalFormula {
            binder: Vec::new(),
            body,
        })
    }
}

fn goal_body(e: &Sexp, out: &mut Vec<LiteralTemplate>) -> Result<(), PddlError> {
    if e.head().is_some_and(|h| h.eq_ignore_ascii_case("exists")) {
        return Err(PddlError::InvalidGoal("nested exists is not supported".into()));
    }
    conjunction(e, out).map_err(|err| match err {
        PddlError::Malformed { message, .. } => PddlError::InvalidGoal(message),
        other => other,
    })
}

fn violation_error(v: GoalViolation) -> PddlError {
    match v {
        GoalViolation::UndeclaredPredicate(p) => PddlError::UndeclaredPredicate(p),
        GoalViolation::ArityMismatch {
            predicate,
            expected,
            found,
        } => PddlError::ArityMismatch {
            predicate,
            expected,
            found,
        },
        GoalViolation::UnboundVariable(v) => PddlError::UnboundVariable(v),
        GoalViolation::DuplicateVariable(v) => {
            PddlError::MalformedBinder(format!("variable `{v}` bound twice"))
        }
        GoalViolation::UnknownType(t) => PddlError::UnknownType(t),
    }
}

fn checked_goal(goal: GoalFormula, domain: &DomainDef) -> Result<GoalFormula, PddlError> {
    match validate_goal(&goal, domain).into_iter().next() {
        Some(v) => Err(violation_error(v)),
        None => Ok(goal),
    }
}

/// Parses a `(:goal ...)` fragment and validates it against `domain`.
pub fn parse_goal(text: &str, domain: &DomainDef) -> Result<GoalFormula, PddlError> {
    let root = read_one(text)?;
    let items = expect_list(&root, "goal")?;
    if items.len() != 2 || !items[0].is_keyword(":goal") {
        return Err(malformed(&root, "expected (:goal <formula>)"));
    }
    checked_goal(goal_formula(&items[1])?, domain)
}

pub fn parse_problem(text: &str, domain: &DomainDef) -> Result<ProblemDef, PddlError> {
    let root = read_one(text)?;
    let (name, sections) = define_body(&root, "problem")?;
    let mut domain_name = None;
    let mut objects: Vec<(String, String)> = Vec::new();
    let mut init_exprs: &[Sexp] = &[];
    let mut goal_expr = None;
    for section in sections {
        let items = expect_list(section, "problem section")?;
        let head = section
            .head()
            .ok_or_else(|| malformed(section, "section without a keyword"))?;
        match head.to_ascii_lowercase().as_str() {
            ":domain" => {
                let d = items
                    .get(1)
                    .ok_or_else(|| malformed(section, "missing domain name"))?;
                domain_name = Some(expect_atom(d, "domain name")?.to_string());
            }
            ":objects" => {
                for (obj, ty) in typed_list(&items[1..])? {
                    if !domain.has_type(&ty) {
                        return Err(PddlError::UnknownType(ty));
                    }
                    if objects.iter().any(|(o, _)| *o == obj) {
                        return Err(malformed(section, format!("object `{obj}` declared twice")));
                    }
                    objects.push((obj, ty));
                }
            }
            ":init" => init_exprs = &items[1..],
            ":goal" => {
                if items.len() != 2 {
                    return Err(malformed(section, "(:goal) takes exactly one formula"));
                }
                goal_expr = Some(&items[1]);
            }
            other => return Err(PddlError::UnknownSection(other.to_string())),
        }
    }
    let object_type = |o: &str| objects.iter().find(|(n, _)| n == o).map(|(_, t)| t.as_str());
    let mut init = BTreeSet::new();
    for e in init_exprs {
        let lit = atom_template(e, true)?;
        let decl = domain
            .predicate(&lit.predicate)
            .ok_or_else(|| PddlError::UndeclaredPredicate(lit.predicate.clone()))?;
        if decl.arity() != lit.args.len() {
            return Err(PddlError::ArityMismatch {
                predicate: lit.predicate.clone(),
                expected: decl.arity(),
                found: lit.args.len(),
            });
        }
        let mut args = Vec::with_capacity(lit.args.len());
        for (term, param) in lit.args.iter().zip(&decl.params) {
            let obj = match term {
                Term::Const(c) => c,
                Term::Var(v) => return Err(PddlError::UnboundVariable(v.clone())),
            };
            let ty = object_type(obj).ok_or_else(|| PddlError::UndeclaredObject(obj.clone()))?;
            if param.type_name != ROOT_TYPE && param.type_name != ty {
                return Err(PddlError::TypeMismatch {
                    predicate: lit.predicate.clone(),
                    object: obj.clone(),
                    expected: param.type_name.clone(),
                    found: ty.to_string(),
                });
            }
            args.push(obj.clone());
        }
        init.insert(Atom {
            predicate: lit.predicate,
            args,
        });
    }
    let goal = match goal_expr {
        Some(g) => checked_goal(goal_formula(g)?, domain)?,
        None => GoalFormula::default(),
    };
    for lit in &goal.body {
        for t in &lit.args {
            if let Term::Const(c) = t {
                if object_type(c).is_none() {
                    return Err(PddlError::UndeclaredObject(c.clone()));
                }
            }
        }
    }
    Ok(ProblemDef {
        name: name.to_string(),
        domain_name: domain_name.unwrap_or_else(|| domain.name.clone()),
        objects,
        init,
        goal,
    })
}
