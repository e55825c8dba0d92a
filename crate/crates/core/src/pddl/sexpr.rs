//! Minimal s-expression reader for PDDL text.

use super::PddlError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String, usize),
    List(Vec<Sexp>, usize),
}

impl Sexp {
    pub fn position(&self) -> usize {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items, _) => Some(items),
            Sexp::Atom(..) => None,
        }
    }

    /// Case-insensitive keyword test on an atom.
    pub fn is_keyword(&self, kw: &str) -> bool {
        self.as_atom().is_some_and(|s| s.eq_ignore_ascii_case(kw))
    }

    /// Head keyword of a list, if the list starts with an atom.
    pub fn head(&self) -> Option<&str> {
        self.as_list()?.first()?.as_atom()
    }
}

/// Reads every top-level expression in `text`.
pub fn read_all(text: &str) -> Result<Vec<Sexp>, PddlError> {
    let mut stack: Vec<(Vec<Sexp>, usize)> = Vec::new();
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b';' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b'(' => stack.push((Vec::new(), i)),
            b')' => {
                let (items, start) = stack.pop().ok_or(PddlError::UnbalancedParens(i))?;
                let list = Sexp::List(items, start);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => out.push(list),
                }
            }
            c if c.is_ascii_whitespace() => {}
            _ => {
                let start = i;
                while i < bytes.len() {
                    let b = bytes[i];
                    if b == b'(' || b == b')' || b == b';' || b.is_ascii_whitespace() {
                        break;
                    }
                    i += 1;
                }
                let atom = Sexp::Atom(text[start..i].to_string(), start);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(atom),
                    None => out.push(atom),
                }
                continue;
            }
        }
        i += 1;
    }
    if let Some((_, start)) = stack.pop() {
        return Err(PddlError::UnbalancedParens(start));
    }
    Ok(out)
}

/// Reads exactly one top-level expression.
pub fn read_one(text: &str) -> Result<Sexp, PddlError> {
    let mut all = read_all(text)?;
    match all.len() {
        1 => Ok(all.remove(0)),
        0 => Err(PddlError::Malformed {
            position: 0,
            message: "expected an s-expression, found nothing".into(),
        }),
        _ => Err(PddlError::Malformed {
            position: all[1].position(),
            message: "unexpected trailing expression".into(),
        }),
    }
}
