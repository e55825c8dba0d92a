use std::fmt::Write;

use super::{DomainDef, GoalFormula, LiteralTemplate, ProblemDef, TypedVar};

fn typed_vars(vars: &[TypedVar]) -> String {
    vars.iter()
        .map(|v| format!("{} - {}", v.name, v.type_name))
        .collect::<Vec<_>>()
        .join(" ")
}

fn atom_text(lit: &LiteralTemplate) -> String {
    let mut s = format!("({}", lit.predicate);
    for a in &lit.args {
        s.push(' ');
        s.push_str(a.as_str());
    }
    s.push(')');
    s
}

fn literal_text(lit: &LiteralTemplate) -> String {
    if lit.positive {
        atom_text(lit)
    } else {
        format!("(not {})", atom_text(lit))
    }
}

fn conjunction_text<'a>(parts: impl Iterator<Item = String> + 'a) -> String {
    let parts: Vec<String> = parts.collect();
    format!("(and{}{})", if parts.is_empty() { "" } else { " " }, parts.join(" "))
}

pub fn print_domain(d: &DomainDef) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (domain {})", d.name);
    if !d.requirements.is_empty() {
        let _ = writeln!(out, "  (:requirements {})", d.requirements.join(" "));
    }
    if !d.types.is_empty() {
        let types: Vec<String> = d
            .types
            .iter()
            .map(|t| format!("{} - {}", t.name, t.parent))
            .collect();
        let _ = writeln!(out, "  (:types {})", types.join(" "));
    }
    out.push_str("  (:predicates\n");
    for p in &d.predicates {
        if p.params.is_empty() {
            let _ = writeln!(out, "    ({})", p.name);
        } else {
            let _ = writeln!(out, "    ({} {})", p.name, typed_vars(&p.params));
        }
    }
    out.push_str("  )\n");
    for a in &d.actions {
        let _ = writeln!(out, "  (:action {}", a.name);
        let _ = writeln!(out, "    :parameters ({})", typed_vars(&a.params));
        let _ = writeln!(
            out,
            "    :precondition {}",
            conjunction_text(a.preconditions.iter().map(literal_text))
        );
        let effects = a
            .add
            .iter()
            .map(atom_text)
            .chain(a.del.iter().map(|l| format!("(not {})", atom_text(l))));
        let _ = writeln!(out, "    :effect {})", conjunction_text(effects));
    }
    out.push_str(")\n");
    out
}

/// Prints a goal as a `(:goal ...)` fragment.
pub fn print_goal(g: &GoalFormula) -> String {
    let body = conjunction_text(g.body.iter().map(literal_text));
    if g.binder.is_empty() {
        format!("(:goal {body})")
    } else {
        format!("(:goal (exists ({}) {body}))", typed_vars(&g.binder))
    }
}

/// Init atoms print in lexicographic order; objects in declaration order.
pub fn print_problem(p: &ProblemDef) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {})", p.name);
    let _ = writeln!(out, "  (:domain {})", p.domain_name);
    out.push_str("  (:objects\n");
    for (name, ty) in &p.objects {
        let _ = writeln!(out, "    {name} - {ty}");
    }
    out.push_str("  )\n  (:init\n");
    for atom in &p.init {
        let _ = writeln!(out, "    {atom}");
    }
    out.push_str("  )\n");
    let _ = writeln!(out, "  {}", print_goal(&p.goal));
    out.push_str(")\n");
    out
}
