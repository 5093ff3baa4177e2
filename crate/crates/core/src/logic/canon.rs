use serde::{Deserialize, Serialize};

use super::syntax::{Atom, Signature, Term};

/// One principal atom plus side atoms over its elements, with elements renamed
/// to `Var(0..k)` by first occurrence in the guard and side atoms sorted.
/// Structural equality is isomorphism.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct GuardedPattern {
    pub guard: Atom,
    pub sides: Vec<Atom>,
}

pub type ChildishType = GuardedPattern;
pub type BodyKey = GuardedPattern;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("side fact mentions a value absent from the principal fact")]
pub struct UnguardedFact;

impl GuardedPattern {
    pub fn n_elems(&self) -> usize {
        self.guard.terms().len()
    }

    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::with_capacity(1 + self.sides.len());
        out.push(self.guard.clone());
        out.extend(self.sides.iter().cloned());
        out
    }

    /// Elements that occur in some side atom, ascending.
    pub fn side_elems(&self) -> Vec<u32> {
        let mut out: Vec<u32> = self.sides.iter().flat_map(|a| a.vars()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn render(&self, sig: &Signature) -> String {
        let show = |a: &Atom| {
            let args: Vec<String> = a
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => (v + 1).to_string(),
                    other => other.to_string(),
                })
                .collect();
            format!("{}({})", sig.name(a.rel), args.join(","))
        };
        let mut parts = vec![show(&self.guard)];
        parts.extend(self.sides.iter().map(show));
        format!("{{{}}}", parts.join(", "))
    }
}

/// Canonicalizes a guard plus side atoms. Returns the pattern and, for each
/// canonical element `i`, the original term it stands for.
pub fn canonicalize_guarded_set(
    principal: &Atom,
    side: &[Atom],
) -> Result<(GuardedPattern, Vec<Term>), UnguardedFact> {
    let elems = principal.terms();
    let rename = |t: &Term| -> Option<Term> {
        elems.iter().position(|e| e == t).map(|i| Term::Var(i as u32))
    };
    let guard = principal.map_terms(|t| rename(&t).unwrap());
    let mut sides = Vec::with_capacity(side.len());
    for a in side {
        let mut args = Vec::with_capacity(a.args.len());
        for t in &a.args {
            args.push(rename(t).ok_or(UnguardedFact)?);
        }
        sides.push(Atom::new(a.rel, args));
    }
    sides.sort();
    sides.dedup();
    sides.retain(|a| *a != guard);
    Ok((GuardedPattern { guard, sides }, elems))
}

/// Instantiates the pattern's elements with `elems`.
pub fn instantiate(atom: &Atom, elems: &[Term]) -> Atom {
    atom.map_terms(|t| match t {
        Term::Var(v) => elems[v as usize],
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{RelId, Sym};

    fn c(s: &str) -> Term {
        Term::Const(Sym::new(s))
    }

    #[test]
    fn running_example_types() {
        let r = RelId(0);
        let u = RelId(1);
        let (t1, _) = canonicalize_guarded_set(&Atom::new(r, vec![c("7"), c("9")]), &[Atom::new(u, vec![c("7")])]).unwrap();
        assert_eq!(t1.guard.args, vec![Term::Var(0), Term::Var(1)]);
        assert_eq!(t1.sides, vec![Atom::new(u, vec![Term::Var(0)])]);
        let (t2, _) = canonicalize_guarded_set(&Atom::new(r, vec![c("9"), c("7")]), &[Atom::new(u, vec![c("7")])]).unwrap();
        assert_eq!(t2.sides, vec![Atom::new(u, vec![Term::Var(1)])]);
        assert_ne!(t1, t2);
    }

    #[test]
    fn repeated_values_and_errors() {
        let r = RelId(0);
        let (a, _) = canonicalize_guarded_set(&Atom::new(r, vec![c("5"), c("5")]), &[]).unwrap();
        let (b, _) = canonicalize_guarded_set(&Atom::new(r, vec![c("3"), c("3")]), &[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.guard.args, vec![Term::Var(0), Term::Var(0)]);
        let err = canonicalize_guarded_set(&Atom::new(r, vec![c("1"), c("2")]), &[Atom::new(RelId(1), vec![c("9")])]);
        assert_eq!(err.unwrap_err(), UnguardedFact);
    }
}
