use std::ops::ControlFlow;

use super::instance::Instance;
use super::syntax::{Atom, Term};

/// Partial substitution indexed by variable id.
pub type Subst = Vec<Option<Term>>;

pub fn subst_len(pattern: &[Atom]) -> usize {
    pattern
        .iter()
        .flat_map(|a| a.args.iter())
        .filter_map(Term::var)
        .max()
        .map_or(0, |v| v as usize + 1)
}

pub fn empty_subst(pattern: &[Atom]) -> Subst {
    vec![None; subst_len(pattern)]
}

/// Applies `s`, leaving unbound variables in place.
pub fn apply(atom: &Atom, s: &[Option<Term>]) -> Atom {
    atom.map_terms(|t| match t {
        Term::Var(v) => s.get(v as usize).copied().flatten().unwrap_or(t),
        other => other,
    })
}

/// Extends `s` so that `pattern` maps onto `fact`; records newly bound variables
/// in `trail`. On failure the bindings made so far stay on the trail.
pub fn bind_atom(pattern: &Atom, fact: &Atom, s: &mut Subst, trail: &mut Vec<u32>) -> bool {
    if pattern.rel != fact.rel || pattern.args.len() != fact.args.len() {
        return false;
    }
    for (p, f) in pattern.args.iter().zip(&fact.args) {
        match p {
            Term::Var(v) => {
                let slot = &mut s[*v as usize];
                match slot {
                    Some(bound) => {
                        if bound != f {
                            return false;
                        }
                    }
                    None => {
                        *slot = Some(*f);
                        trail.push(*v);
                    }
                }
            }
            other => {
                if other != f {
                    return false;
                }
            }
        }
    }
    true
}

fn undo(s: &mut Subst, trail: &mut Vec<u32>, mark: usize) {
    while trail.len() > mark {
        let v = trail.pop().unwrap();
        s[v as usize] = None;
    }
}

fn fully_bound(atom: &Atom, s: &Subst) -> bool {
    atom.args.iter().all(|t| match t {
        Term::Var(v) => s[*v as usize].is_some(),
        _ => true,
    })
}

fn search<B>(
    pattern: &[Atom],
    i: usize,
    target: &Instance,
    s: &mut Subst,
    trail: &mut Vec<u32>,
    f: &mut dyn FnMut(&Subst) -> ControlFlow<B>,
) -> ControlFlow<B> {
    if i == pattern.len() {
        return f(s);
    }
    let atom = &pattern[i];
    if fully_bound(atom, s) {
        if target.contains(&apply(atom, s)) {
            return search(pattern, i + 1, target, s, trail, f);
        }
        return ControlFlow::Continue(());
    }
    for &idx in target.rel_indices(atom.rel) {
        let mark = trail.len();
        if bind_atom(atom, target.get(idx), s, trail) {
            search(pattern, i + 1, target, s, trail, f)?;
        }
        undo(s, trail, mark);
    }
    ControlFlow::Continue(())
}

/// Visits every extension of `seed` mapping `pattern` into `target`, in atom
/// order then target insertion order. Stops early when `f` breaks.
pub fn for_each_hom<B>(
    pattern: &[Atom],
    target: &Instance,
    seed: &[Option<Term>],
    mut f: impl FnMut(&Subst) -> ControlFlow<B>,
) -> ControlFlow<B> {
    let mut s: Subst = seed.to_vec();
    let n = subst_len(pattern);
    if s.len() < n {
        s.resize(n, None);
    }
    let mut trail = Vec::new();
    search(pattern, 0, target, &mut s, &mut trail, &mut f)
}

pub fn find_homomorphisms(pattern: &[Atom], target: &Instance, seed: &[Option<Term>]) -> Vec<Subst> {
    let mut out = Vec::new();
    let _ = for_each_hom::<()>(pattern, target, seed, |s| {
        out.push(s.clone());
        ControlFlow::Continue(())
    });
    out
}

pub fn first_hom(pattern: &[Atom], target: &Instance, seed: &[Option<Term>]) -> Option<Subst> {
    match for_each_hom(pattern, target, seed, |s| ControlFlow::Break(s.clone())) {
        ControlFlow::Break(s) => Some(s),
        ControlFlow::Continue(()) => None,
    }
}

/// Matches `pattern` with at least one atom mapped onto `anchor`.
pub fn first_hom_through(pattern: &[Atom], target: &Instance, anchor: &Atom) -> Option<Subst> {
    let n = subst_len(pattern);
    for atom in pattern {
        if atom.rel != anchor.rel {
            continue;
        }
        let mut s: Subst = vec![None; n];
        let mut trail = Vec::new();
        if !bind_atom(atom, anchor, &mut s, &mut trail) {
            continue;
        }
        if let Some(m) = first_hom(pattern, target, &s) {
            return Some(m);
        }
    }
    None
}

/// Completes a substitution into a total one; panics if a variable stays unbound.
pub fn total(s: &Subst) -> Vec<Term> {
    s.iter().map(|t| t.expect("unbound variable")).collect()
}
