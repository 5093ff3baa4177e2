//! Terms, atoms, rules, instances, homomorphisms and guarded-set canonicalization.

mod canon;
mod hom;
mod instance;
mod sym;
mod syntax;
mod tgd;

pub use canon::{canonicalize_guarded_set, instantiate, BodyKey, ChildishType, GuardedPattern, UnguardedFact};
pub use hom::{
    apply, bind_atom, empty_subst, find_homomorphisms, first_hom, first_hom_through, for_each_hom, subst_len,
    total, Subst,
};
pub use instance::Instance;
pub use sym::Sym;
pub use syntax::{
    Atom, AtomDisplay, DuplicateRelation, Origin, Purpose, RelId, RelKind, RelationSymbol, Signature, Term,
};
pub use tgd::{analyze_rule, Cq, RuleMetrics, Tgd};

/// Global parameters of a rule set over a signature.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize)]
pub struct SignatureStats {
    /// Maximal arity, at least 2.
    pub a: usize,
    pub a_prime: usize,
    pub n_prime: usize,
    pub w: usize,
    pub w_prime: usize,
}

impl SignatureStats {
    pub fn compute(sig: &Signature, rules: &[Tgd]) -> SignatureStats {
        let a = sig.iter().map(|(_, r)| r.arity).max().unwrap_or(0).max(2);
        let side: Vec<usize> = sig.iter().filter(|(_, r)| r.kind == RelKind::Side).map(|(_, r)| r.arity).collect();
        let a_prime = side.iter().copied().max().unwrap_or(0);
        let w = rules.iter().map(Tgd::width).max().unwrap_or(0);
        SignatureStats { a, a_prime, n_prime: side.len(), w, w_prime: w.max(a_prime) }
    }
}
