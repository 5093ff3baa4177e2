use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::sym::Sym;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum Term {
    Var(u32),
    Const(Sym),
    Null(u32),
}

impl Term {
    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn var(&self) -> Option<u32> {
        match self {
            Term::Var(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_value(&self) -> bool {
        !self.is_var()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct RelId(pub u32);

impl RelId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Atom {
    pub rel: RelId,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(rel: RelId, args: Vec<Term>) -> Atom {
        Atom { rel, args }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_value)
    }

    /// Distinct variables in order of first occurrence.
    pub fn vars(&self) -> Vec<u32> {
        let mut out = Vec::new();
        for t in &self.args {
            if let Term::Var(v) = t {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
        }
        out
    }

    /// Distinct terms in order of first occurrence.
    pub fn terms(&self) -> Vec<Term> {
        let mut out = Vec::new();
        for t in &self.args {
            if !out.contains(t) {
                out.push(*t);
            }
        }
        out
    }

    pub fn contains_term(&self, t: &Term) -> bool {
        self.args.contains(t)
    }

    /// Equality pattern: each position holds the index of the first position
    /// carrying the same term.
    pub fn pattern(&self) -> Vec<u32> {
        let mut seen: Vec<Term> = Vec::new();
        self.args
            .iter()
            .map(|t| match seen.iter().position(|s| s == t) {
                Some(i) => i as u32,
                None => {
                    seen.push(*t);
                    (seen.len() - 1) as u32
                }
            })
            .collect()
    }

    pub fn map_terms(&self, mut f: impl FnMut(Term) -> Term) -> Atom {
        Atom { rel: self.rel, args: self.args.iter().map(|t| f(*t)).collect() }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum RelKind {
    Principal,
    Side,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Purpose {
    Twin,
    Split,
    Const,
    Lin,
}

impl Purpose {
    pub fn tag(self) -> &'static str {
        match self {
            Purpose::Twin => "twin",
            Purpose::Split => "split",
            Purpose::Const => "const",
            Purpose::Lin => "lin",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Purpose> {
        Some(match tag {
            "twin" => Purpose::Twin,
            "split" => Purpose::Split,
            "const" => Purpose::Const,
            "lin" => Purpose::Lin,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Origin {
    Source,
    Generated(Purpose),
}

#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct RelationSymbol {
    pub name: String,
    pub arity: usize,
    pub kind: RelKind,
    pub origin: Origin,
}

#[derive(Clone, Debug, Default)]
pub struct Signature {
    rels: Vec<RelationSymbol>,
    by_name: HashMap<String, RelId>,
}

impl PartialEq for Signature {
    fn eq(&self, other: &Self) -> bool {
        self.rels == other.rels
    }
}

impl Eq for Signature {}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("relation `{0}` declared twice")]
pub struct DuplicateRelation(pub String);

impl Signature {
    pub fn new() -> Signature {
        Signature::default()
    }

    pub fn add(
        &mut self,
        name: &str,
        arity: usize,
        kind: RelKind,
        origin: Origin,
    ) -> Result<RelId, DuplicateRelation> {
        if self.by_name.contains_key(name) {
            return Err(DuplicateRelation(name.to_owned()));
        }
        let id = RelId(self.rels.len() as u32);
        self.rels.push(RelationSymbol { name: name.to_owned(), arity, kind, origin });
        self.by_name.insert(name.to_owned(), id);
        Ok(id)
    }

    /// Adds a generated relation under `base`, suffixing a counter on clashes.
    pub fn add_fresh(&mut self, base: &str, arity: usize, kind: RelKind, purpose: Purpose) -> RelId {
        let mut name = base.to_owned();
        let mut k = 1;
        while self.by_name.contains_key(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        self.add(&name, arity, kind, Origin::Generated(purpose)).expect("fresh name")
    }

    pub fn lookup(&self, name: &str) -> Option<RelId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: RelId) -> &RelationSymbol {
        &self.rels[id.index()]
    }

    pub fn name(&self, id: RelId) -> &str {
        &self.rels[id.index()].name
    }

    pub fn arity(&self, id: RelId) -> usize {
        self.rels[id.index()].arity
    }

    pub fn is_side(&self, id: RelId) -> bool {
        self.rels[id.index()].kind == RelKind::Side
    }

    pub fn is_principal(&self, id: RelId) -> bool {
        !self.is_side(id)
    }

    pub fn len(&self) -> usize {
        self.rels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rels.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = RelId> + '_ {
        (0..self.rels.len() as u32).map(RelId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (RelId, &RelationSymbol)> {
        self.rels.iter().enumerate().map(|(i, r)| (RelId(i as u32), r))
    }
}

/// Displays a term outside any rule context: variables as `x<id>`, nulls as `$<n>`.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "x{v}"),
            Term::Const(c) => write!(f, "{c}"),
            Term::Null(n) => write!(f, "${n}"),
        }
    }
}

pub struct AtomDisplay<'a> {
    pub sig: &'a Signature,
    pub atom: &'a Atom,
}

impl fmt::Display for AtomDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.sig.name(self.atom.rel))?;
        for (i, t) in self.atom.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

impl Signature {
    pub fn show<'a>(&'a self, atom: &'a Atom) -> AtomDisplay<'a> {
        AtomDisplay { sig: self, atom }
    }
}
