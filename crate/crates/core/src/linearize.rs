//! Linearization: one relation `R_S` per childish type `S`, full linear rules
//! that unfold `R_S` into the facts `S` entails, and linear rules that lift a
//! principal rule firing into the type of the created child.

use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;
use num_bigint::BigUint;

use crate::linear::{decomposition_from_split, SemiWidthDecomposition};
use crate::logic::{
    apply, bind_atom, canonicalize_guarded_set, find_homomorphisms, instantiate, Atom, ChildishType, Instance,
    Purpose, RelId, RelKind, Signature, Term, Tgd,
};
use crate::saturate::Saturation;

/// Canonical types and their relations.
#[derive(Clone, Debug, Default)]
pub struct ChildishCatalog {
    pub types: IndexMap<ChildishType, RelId>,
}

impl ChildishCatalog {
    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn relation(&self, t: &ChildishType) -> Option<RelId> {
        self.types.get(t).copied()
    }

    pub fn type_of(&self, rel: RelId) -> Option<(usize, &ChildishType)> {
        self.types.iter().enumerate().find(|(_, (_, r))| **r == rel).map(|(i, (t, _))| (i, t))
    }
}

/// Where a linear rule comes from. Atoms are over the type's element variables
/// before renumbering; `body_atom` is `R_S(h(x))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinRuleOrigin {
    Instantiate {
        ty: usize,
        body_atom: Atom,
        /// Saturation body of `h(S)` and the head producing the fact.
        sat_body: usize,
        sat_head: Atom,
        /// Saturation element `i` ↦ type element.
        key_elems: Vec<Term>,
    },
    Lift {
        ty: usize,
        body_atom: Atom,
        head_atom: Atom,
        sat_body: usize,
        key_elems: Vec<Term>,
        delta: usize,
        /// Values of δ's body variables as type elements.
        trigger: Vec<Term>,
        target: usize,
    },
}

impl LinRuleOrigin {
    pub fn is_lift(&self) -> bool {
        matches!(self, LinRuleOrigin::Lift { .. })
    }
}

/// A fact of the linearized instance that stands for a child of the root whose
/// trigger touches more than `w′` values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootLift {
    pub fact: Atom,
    pub delta: usize,
    pub trigger: Vec<Term>,
}

/// Origin of a linearized-instance fact over a catalog relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinFactOrigin {
    /// `R_S(a)` for an instance fact `R(a)`; `elems` gives the type's element values.
    Root { ty: usize, elems: Vec<Term> },
    RootLift(usize),
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub sig: Signature,
    pub rules: Vec<Tgd>,
    pub origins: Vec<LinRuleOrigin>,
    pub instance: Instance,
    pub fact_origins: HashMap<Atom, LinFactOrigin>,
    pub root_lifts: Vec<RootLift>,
    pub catalog: ChildishCatalog,
    pub decomposition: SemiWidthDecomposition,
    pub w_prime: usize,
}

impl LinearProgram {
    pub fn instantiate_count(&self) -> usize {
        self.origins.iter().filter(|o| !o.is_lift()).count()
    }

    pub fn lift_count(&self) -> usize {
        self.origins.iter().filter(|o| o.is_lift()).count()
    }

    /// Rules rendered with type relations, for display.
    pub fn render_rules(&self) -> Vec<String> {
        self.rules.iter().map(|r| crate::dsl::render_tgd(&self.sig, r)).collect()
    }

    /// The program in the textual format.
    pub fn to_program(&self) -> crate::dsl::Program {
        crate::dsl::Program {
            sig: self.sig.clone(),
            tgds: self.rules.clone(),
            instance: self.instance.clone(),
            queries: vec![],
        }
    }
}

struct Builder<'a> {
    sat: &'a mut Saturation,
    sig: Signature,
    catalog: ChildishCatalog,
    rules: Vec<Tgd>,
    origins: Vec<LinRuleOrigin>,
    shapes: HashSet<(Vec<Atom>, Vec<Atom>)>,
}

impl Builder<'_> {
    fn register(&mut self, t: ChildishType) -> usize {
        if let Some(i) = self.catalog.types.get_index_of(&t) {
            return i;
        }
        let k = self.catalog.types.len();
        let base = format!("lin_{}_{}", self.sig.name(t.guard.rel), k);
        let rel = self.sig.add_fresh(&base, t.guard.args.len(), RelKind::Principal, Purpose::Lin);
        self.catalog.types.insert(t, rel);
        k
    }

    fn emit(&mut self, rule: Tgd, origin: LinRuleOrigin) {
        if self.shapes.insert(rule.shape()) {
            self.rules.push(rule);
            self.origins.push(origin);
        }
    }

    fn expand(&mut self, ty: usize) {
        let (s, rel) = {
            let (s, r) = self.catalog.types.get_index(ty).unwrap();
            (s.clone(), *r)
        };
        let k = s.n_elems() as u32;
        let ys = s.side_elems();
        for h in endomorphisms(&ys) {
            let map = |t: Term| match t {
                Term::Var(e) => Term::Var(ys.iter().position(|&y| y == e).map_or(e, |i| h[i])),
                o => o,
            };
            let guard = s.guard.map_terms(map);
            let sides: Vec<Atom> = s.sides.iter().map(|a| a.map_terms(map)).collect();
            let (sat_body, key_elems) = self.sat.demand_instance(&guard, &sides);
            let body_atom = Atom::new(rel, guard.args.clone());
            let closed: Vec<Atom> = self.sat.closed_facts(sat_body).iter().cloned().collect();
            let s_prime: Instance = closed.iter().map(|a| instantiate(a, &key_elems)).collect();
            for a in &closed {
                let fact = instantiate(a, &key_elems);
                self.emit(
                    Tgd::unnamed(vec![body_atom.clone()], vec![fact]),
                    LinRuleOrigin::Instantiate {
                        ty,
                        body_atom: body_atom.clone(),
                        sat_body,
                        sat_head: a.clone(),
                        key_elems: key_elems.clone(),
                    },
                );
            }
            let sigma = self.sat.sigma().to_vec();
            for (di, delta) in sigma.iter().enumerate() {
                if delta.is_full() {
                    continue;
                }
                for m in find_homomorphisms(&delta.body, &s_prime, &[]) {
                    let nb = delta.n_body_vars();
                    let trigger: Vec<Term> = m[..nb].iter().map(|t| t.unwrap()).collect();
                    let mut full = m[..nb].to_vec();
                    for j in 0..delta.n_vars() - nb {
                        full.push(Some(Term::Var(k + j as u32)));
                    }
                    let head = apply(&delta.head[0], &full);
                    let exported: Vec<Term> = head.terms().into_iter().filter(|t| matches!(t, Term::Var(v) if *v < k)).collect();
                    let inherited: Vec<Atom> = s_prime
                        .iter()
                        .filter(|f| self.sig.is_side(f.rel) && f.args.iter().all(|t| exported.contains(t)))
                        .cloned()
                        .collect();
                    let (child, _) = canonicalize_guarded_set(&head, &inherited).expect("guarded by the head");
                    let target = self.register(child);
                    let trel = self.catalog.types[target];
                    let head_atom = Atom::new(trel, head.args.clone());
                    self.emit(
                        Tgd::unnamed(vec![body_atom.clone()], vec![head_atom.clone()]),
                        LinRuleOrigin::Lift {
                            ty,
                            body_atom: body_atom.clone(),
                            head_atom,
                            sat_body,
                            key_elems: key_elems.clone(),
                            delta: di,
                            trigger,
                            target,
                        },
                    );
                }
            }
        }
    }
}

/// All maps from `ys` to itself, as image lists aligned with `ys`.
fn endomorphisms(ys: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in ys {
        out = out
            .into_iter()
            .flat_map(|p: Vec<u32>| {
                ys.iter().map(move |&y| {
                    let mut p = p.clone();
                    p.push(y);
                    p
                })
            })
            .collect();
    }
    // Identity first.
    if let Some(i) = out.iter().position(|p| p.as_slice() == ys) {
        out.swap(0, i);
    }
    out
}

fn subsets<T: Copy>(vals: &[T], max: usize) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![vec![]];
    for &v in vals {
        let grown: Vec<Vec<T>> = out.iter().filter(|s| s.len() < max).map(|s| {
            let mut s = s.clone();
            s.push(v);
            s
        }).collect();
        out.extend(grown);
    }
    out
}

/// `|types| · w′^{w′} · (|sig|·a^a + |Σ|·a^a)`: ceiling on the number of linear rules.
pub fn linear_rule_bound(types: usize, w_prime: usize, sig_size: usize, sigma_size: usize, a: usize) -> BigUint {
    let homs = BigUint::from(w_prime.max(1)).pow(w_prime as u32);
    let aa = BigUint::from(a).pow(a as u32);
    BigUint::from(types) * homs * (BigUint::from(sig_size) * &aa + BigUint::from(sigma_size) * &aa)
}

/// Linearizes the normalized program behind `sat` over the fact-saturated `instance`.
pub fn linearize(sat: &mut Saturation, instance: &Instance) -> LinearProgram {
    let sig = sat.signature().clone();
    let w = sat.stats().w_prime;
    let mut b = Builder {
        sat,
        sig,
        catalog: ChildishCatalog::default(),
        rules: Vec::new(),
        origins: Vec::new(),
        shapes: HashSet::new(),
    };
    let mut lin = instance.clone();
    let mut fact_origins = HashMap::new();
    let mut root_lifts = Vec::new();
    let mut next_null = instance
        .iter()
        .flat_map(|a| a.args.iter())
        .filter_map(|t| if let Term::Null(n) = t { Some(n + 1) } else { None })
        .max()
        .unwrap_or(0);
    let principal: Vec<Atom> = instance.iter().filter(|f| b.sig.is_principal(f.rel)).cloned().collect();
    let sides_of = |vals: &[Term]| -> Vec<Atom> {
        instance
            .iter()
            .filter(|f| b.sig.is_side(f.rel) && f.args.iter().all(|t| vals.contains(t)))
            .cloned()
            .collect()
    };
    let mut root_types = Vec::new();
    for f in &principal {
        for y in subsets(&f.terms(), w) {
            let (t, elems) = canonicalize_guarded_set(f, &sides_of(&y)).expect("guarded");
            root_types.push((f.clone(), t, elems));
        }
    }
    // Root children whose trigger spans more than w′ values.
    let mut lifts = Vec::new();
    let sigma = b.sat.sigma().to_vec();
    for f in &principal {
        for (di, delta) in sigma.iter().enumerate() {
            if delta.is_full() {
                continue;
            }
            let Some(g) = delta.principal_guard(&b.sig) else { continue };
            let mut seed = vec![None; delta.n_body_vars()];
            if !bind_atom(&delta.body[g], f, &mut seed, &mut Vec::new()) {
                continue;
            }
            for m in find_homomorphisms(&delta.body, instance, &seed) {
                let nb = delta.n_body_vars();
                let trigger: Vec<Term> = m[..nb].iter().map(|t| t.unwrap()).collect();
                let mut touched: Vec<Term> = Vec::new();
                for (i, a) in delta.body.iter().enumerate() {
                    if i != g {
                        touched.extend(apply(a, &m).args);
                    }
                }
                for v in delta.exported() {
                    touched.push(trigger[v as usize]);
                }
                touched.sort();
                touched.dedup();
                if touched.len() <= w {
                    continue;
                }
                let mut full = m[..nb].to_vec();
                for _ in nb..delta.n_vars() {
                    full.push(Some(Term::Null(next_null)));
                    next_null += 1;
                }
                let head = apply(&delta.head[0], &full);
                let exported: Vec<Term> = delta.exported().iter().map(|&v| trigger[v as usize]).collect();
                let (t, _) = canonicalize_guarded_set(&head, &sides_of(&exported)).expect("guarded");
                lifts.push((di, trigger, head, t));
            }
        }
    }
    for (f, t, elems) in root_types {
        let ty = b.register(t);
        let fact = Atom::new(b.catalog.types[ty], f.args.clone());
        fact_origins.entry(fact.clone()).or_insert(LinFactOrigin::Root { ty, elems });
        lin.insert(fact);
    }
    for (di, trigger, head, t) in lifts {
        let ty = b.register(t);
        let fact = Atom::new(b.catalog.types[ty], head.args.clone());
        fact_origins.insert(fact.clone(), LinFactOrigin::RootLift(root_lifts.len()));
        root_lifts.push(RootLift { fact: fact.clone(), delta: di, trigger });
        lin.insert(fact);
    }
    let mut done = 0;
    while done < b.catalog.types.len() {
        b.expand(done);
        done += 1;
    }
    let st = *b.sat.stats();
    let bound = linear_rule_bound(b.catalog.len(), w, b.sat.signature().len(), sigma.len(), st.a);
    assert!(BigUint::from(b.rules.len()) <= bound, "linear rule count exceeds its bound");
    let lifts: Vec<usize> = (0..b.rules.len()).filter(|&i| b.origins[i].is_lift()).collect();
    let decomposition = decomposition_from_split(&b.rules, lifts, w).expect("lift rules are narrow and unfolding rules acyclic");
    LinearProgram {
        sig: b.sig,
        rules: b.rules,
        origins: b.origins,
        instance: lin,
        fact_origins,
        root_lifts,
        catalog: b.catalog,
        decomposition,
        w_prime: w,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_program, render_fact};
    use crate::factclosure::fact_saturate;
    use crate::preprocess::normalize;

    fn ex9() -> (crate::dsl::Program, Saturation, LinearProgram) {
        let p = parse_program("rel R/2\nrel U/1 side\ntgd R(x,y) -> R(y,z)\ntgd R(x,y), U(x) -> U(y)\nfact R(a,b)\nfact U(a)").unwrap();
        let (n, _) = normalize(&p).unwrap();
        let mut sat = Saturation::saturate(&n);
        let fc = fact_saturate(&mut sat, &n.instance);
        let lin = linearize(&mut sat, &fc.saturated);
        (n, sat, lin)
    }

    fn rel_of(lin: &LinearProgram, n: &crate::dsl::Program, text: &str) -> String {
        let (t, _) = {
            let q = parse_program(&format!("{}fact {text}", crate::dsl::render_signature(&n.sig))).unwrap();
            let facts: Vec<Atom> = q.instance.iter().cloned().collect();
            canonicalize_guarded_set(&facts[0], &facts[1..]).unwrap()
        };
        lin.sig.name(lin.catalog.relation(&t).unwrap()).to_owned()
    }

    #[test]
    fn running_example_types_and_rules() {
        let (n, _, lin) = ex9();
        assert_eq!(lin.catalog.len(), 3);
        let i1 = rel_of(&lin, &n, "R(c1,c2)\nfact U(c1)");
        let i2 = rel_of(&lin, &n, "R(c1,c2)\nfact U(c2)");
        let rules = lin.render_rules();
        assert!(rules.contains(&format!("{i1}(x1,x2) -> U(x1)")), "{rules:?}");
        assert!(rules.contains(&format!("{i1}(x1,x2) -> R(x1,x2)")));
        assert!(rules.contains(&format!("{i1}(x1,x2) -> U(x2)")));
        assert!(rules.contains(&format!("{i2}(x1,x2) -> {i1}(x2,x3)")));
        assert!(lin.decomposition.verify(&lin.rules));
    }

    #[test]
    fn running_example_instance() {
        let (n, _, lin) = ex9();
        let i1 = rel_of(&lin, &n, "R(c1,c2)\nfact U(c1)");
        let i2 = rel_of(&lin, &n, "R(c1,c2)\nfact U(c2)");
        let i3 = rel_of(&lin, &n, "R(c1,c2)");
        let facts: Vec<String> = lin.instance.iter().map(|f| render_fact(&lin.sig, f)).collect();
        for r in [i1, i2, i3] {
            assert!(facts.contains(&format!("{r}(a,b)")), "{facts:?}");
        }
        assert!(lin.root_lifts.is_empty());
    }

    #[test]
    fn bare_type_lifts_to_itself() {
        let p = parse_program("rel R/2\ntgd R(x,y) -> R(y,z)\nfact R(a,b)").unwrap();
        let (n, _) = normalize(&p).unwrap();
        let mut sat = Saturation::saturate(&n);
        let lin = linearize(&mut sat, &n.instance);
        assert_eq!(lin.catalog.len(), 1);
        let r = lin.sig.name(lin.catalog.types[0]).to_owned();
        assert_eq!(lin.render_rules(), vec![format!("{r}(x1,x2) -> R(x1,x2)"), format!("{r}(x1,x2) -> {r}(x2,x3)")]);
    }

    #[test]
    fn repeated_values_and_no_principal_facts() {
        let p = parse_program("rel R/2\nrel U/1 side\ntgd R(x,y) -> U(x)\nfact R(a,a)\nfact U(c)").unwrap();
        let (n, _) = normalize(&p).unwrap();
        let mut sat = Saturation::saturate(&n);
        let lin = linearize(&mut sat, &n.instance);
        assert!(lin.catalog.types.keys().any(|t| t.guard.args == vec![Term::Var(0), Term::Var(0)]));
        let q = parse_program("rel R/2\nrel U/1 side\nfact U(c)").unwrap();
        let mut sat = Saturation::saturate(&q);
        assert_eq!(linearize(&mut sat, &q.instance).instance, q.instance);
    }

    #[test]
    fn endomorphism_count() {
        assert_eq!(endomorphisms(&[0, 1]).len(), 4);
        assert_eq!(endomorphisms(&[0, 1])[0], vec![0, 1]);
        assert_eq!(endomorphisms(&[]).len(), 1);
    }
}
