//! Childish saturation: the suitable full rules entailed by a normalized rule
//! set, computed per canonical body on demand.
//!
//! For a body `β` the engine keeps the set `N(β)` of the body atoms plus every
//! head derived so far. Σ full rules fire on `N(β)` directly (Transitivity);
//! every principal Σ rule matched into `N(β)` spawns a child body made of its
//! head plus the side facts of `N(β)` over the exported values, and the
//! child's heads over non-null elements are lifted back (Principal+Transitivity).
//! A worklist re-processes parents whenever a child gains heads.

use std::collections::{HashMap, HashSet, VecDeque};

use indexmap::{IndexMap, IndexSet};
use num_bigint::BigUint;
use num_traits::One;

use crate::dsl::Program;
use crate::logic::{
    analyze_rule, apply, canonicalize_guarded_set, find_homomorphisms, instantiate, Atom, BodyKey, GuardedPattern,
    Instance, RelId, Signature, SignatureStats, Term, Tgd,
};

/// How a head of a body was obtained.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Derivation {
    /// The head is an atom of the body.
    Trivial,
    /// A full Σ rule fired on `N(β)`; `trigger` holds its body-variable values.
    Transitivity { rule: usize, trigger: Vec<Term> },
    /// Lifted from the child created by the principal Σ rule `creator`.
    /// `elems[i]` is the value in `β` of child element `i`, or a `Null`
    /// placeholder for an invented value.
    PrincipalTransitivity { creator: usize, trigger: Vec<Term>, child: usize, child_head: Atom, elems: Vec<Term> },
}

#[derive(Clone, Debug)]
struct Entry {
    key: BodyKey,
    heads: IndexMap<Atom, Derivation>,
    facts: Instance,
    parents: IndexSet<usize>,
    /// Guard compatible with a Σ head and sides within the breadth bound.
    suitable: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuitabilityWitness {
    pub is_full: bool,
    pub single_head: bool,
    pub principal_guard_count: usize,
    /// Σ rule whose head atom the guard is isomorphic to.
    pub compatible_guard: Option<usize>,
    /// Σ rule whose head atom the head is isomorphic to; `None` for side heads.
    pub compatible_head: Option<usize>,
    pub head_is_side: bool,
    pub width: usize,
    pub breadth: Option<usize>,
    pub bound: usize,
}

impl SuitabilityWitness {
    pub fn holds(&self) -> bool {
        self.is_full
            && self.single_head
            && self.principal_guard_count == 1
            && self.compatible_guard.is_some()
            && (self.head_is_side || self.compatible_head.is_some())
            && self.width <= self.bound
            && self.breadth.is_some_and(|b| b <= self.bound)
    }
}

/// Map from head equality patterns to the first Σ rule carrying them.
fn head_patterns(sig: &Signature, sigma: &[Tgd]) -> HashMap<(RelId, Vec<u32>), usize> {
    let mut out = HashMap::new();
    for (i, r) in sigma.iter().enumerate() {
        for h in &r.head {
            if sig.is_principal(h.rel) {
                out.entry((h.rel, h.pattern())).or_insert(i);
            }
        }
    }
    out
}

/// Checks suitability of a full rule with respect to `sigma`; the bound is
/// `w′ = max(w, a′)` of `sigma`.
pub fn is_suitable(rule: &Tgd, sig: &Signature, sigma: &[Tgd]) -> SuitabilityWitness {
    let stats = SignatureStats::compute(sig, sigma);
    let pats = head_patterns(sig, sigma);
    let m = analyze_rule(rule, sig);
    let guard = rule.principal_guard(sig);
    let compatible_guard = guard.and_then(|g| pats.get(&(rule.body[g].rel, rule.body[g].pattern())).copied());
    let head = &rule.head[0];
    let head_is_side = sig.is_side(head.rel);
    SuitabilityWitness {
        is_full: rule.is_full(),
        single_head: rule.head.len() == 1,
        principal_guard_count: m.principal_guard_count,
        compatible_guard,
        compatible_head: pats.get(&(head.rel, head.pattern())).copied(),
        head_is_side,
        width: m.width,
        breadth: m.breadth,
        bound: stats.w_prime,
    }
}

/// `|Σ|² · (a+1)^{3w′} · 2^{n′·w′^{a′}}`.
pub fn suitable_count_bound(stats: &SignatureStats, sigma_size: usize) -> BigUint {
    let w = stats.w_prime as u32;
    let s = BigUint::from(sigma_size);
    let exp = (stats.n_prime as u64) * (stats.w_prime as u64).pow(stats.a_prime as u32);
    let two_pow = BigUint::one() << (exp as usize);
    &s * &s * BigUint::from(stats.a as u64 + 1).pow(3 * w) * two_pow
}

/// Σ_triv: for each principal head type `A` of Σ and each set of side atoms on
/// at most `w′` variables of `A`, the rule `A ∧ sides → A`.
pub fn enumerate_trivial_rules<'a>(sig: &'a Signature, sigma: &'a [Tgd]) -> impl Iterator<Item = Tgd> + 'a {
    let stats = SignatureStats::compute(sig, sigma);
    let mut types: Vec<Atom> = Vec::new();
    for r in sigma {
        for h in &r.head {
            if sig.is_principal(h.rel) {
                let (pat, _) = canonicalize_guarded_set(h, &[]).expect("no sides");
                if !types.contains(&pat.guard) {
                    types.push(pat.guard);
                }
            }
        }
    }
    let side: Vec<RelId> = sig.ids().filter(|&r| sig.is_side(r)).collect();
    types.into_iter().flat_map(move |guard| {
        let k = guard.vars().len() as u32;
        side_sets(&side, sig, k, stats.w_prime)
            .into_iter()
            .map(move |sides| {
                let mut body = vec![guard.clone()];
                body.extend(sides);
                Tgd::unnamed(body, vec![guard.clone()])
            })
    })
}

/// All side-atom sets whose variables form a subset of `0..k` of size ≤ `w`,
/// each set produced once.
fn side_sets(side: &[RelId], sig: &Signature, k: u32, w: usize) -> Vec<Vec<Atom>> {
    let mut out = vec![vec![]];
    for size in 1..=w.min(k as usize) {
        for subset in combinations(k, size) {
            let atoms: Vec<Atom> = side
                .iter()
                .flat_map(|&r| tuples(&subset, sig.arity(r)).into_iter().map(move |args| Atom::new(r, args)))
                .collect();
            // Non-empty subsets of `atoms` covering exactly `subset`.
            let n = atoms.len();
            for mask in 1u64..(1u64 << n) {
                let chosen: Vec<Atom> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| atoms[i].clone()).collect();
                let mut used: Vec<u32> = chosen.iter().flat_map(|a| a.vars()).collect();
                used.sort_unstable();
                used.dedup();
                if used.len() == subset.len() {
                    out.push(chosen);
                }
            }
        }
    }
    out
}

fn combinations(k: u32, size: usize) -> Vec<Vec<u32>> {
    fn go(start: u32, k: u32, size: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for v in start..k {
            cur.push(v);
            go(v + 1, k, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, k, size, &mut Vec::new(), &mut out);
    out
}

fn tuples(vals: &[u32], arity: usize) -> Vec<Vec<Term>> {
    let mut out = vec![vec![]];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|t: Vec<Term>| {
                vals.iter().map(move |&v| {
                    let mut t = t.clone();
                    t.push(Term::Var(v));
                    t
                })
            })
            .collect();
    }
    out
}

/// Demand-driven childish saturation of a normalized program.
#[derive(Clone, Debug)]
pub struct Saturation {
    sig: Signature,
    sigma: Vec<Tgd>,
    stats: SignatureStats,
    patterns: HashMap<(RelId, Vec<u32>), usize>,
    entries: Vec<Entry>,
    index: HashMap<BodyKey, usize>,
    queue: VecDeque<usize>,
    queued: Vec<bool>,
    /// Injected fault: the first derived head is dropped, permanently.
    fault: Option<Option<(BodyKey, Atom)>>,
}

impl Saturation {
    /// An empty saturation; bodies are added with [`Saturation::demand`].
    pub fn new(p: &Program) -> Saturation {
        Saturation {
            sig: p.sig.clone(),
            sigma: p.tgds.clone(),
            stats: SignatureStats::compute(&p.sig, &p.tgds),
            patterns: head_patterns(&p.sig, &p.tgds),
            entries: Vec::new(),
            index: HashMap::new(),
            queue: VecDeque::new(),
            queued: Vec::new(),
            fault: None,
        }
    }

    /// Saturates every suitable body of Σ and every bare principal head type.
    pub fn saturate(p: &Program) -> Saturation {
        Saturation::saturate_with(p, false)
    }

    /// [`Saturation::saturate`], optionally with the injected fault.
    pub fn saturate_with(p: &Program, fault: bool) -> Saturation {
        let mut s = Saturation::new(p);
        if fault {
            s.inject_fault();
        }
        let mut keys = Vec::new();
        for r in &s.sigma {
            if !r.is_full() {
                continue;
            }
            let Some(g) = r.principal_guard(&s.sig) else { continue };
            let sides: Vec<Atom> = r.body.iter().enumerate().filter(|&(i, _)| i != g).map(|(_, a)| a.clone()).collect();
            if let Ok((key, _)) = canonicalize_guarded_set(&r.body[g], &sides) {
                if s.body_is_suitable(&key) {
                    keys.push(key);
                }
            }
        }
        for r in &s.sigma {
            for h in &r.head {
                if s.sig.is_principal(h.rel) {
                    keys.push(canonicalize_guarded_set(h, &[]).expect("no sides").0);
                }
            }
        }
        for k in keys {
            s.demand(k);
        }
        s.run();
        s
    }

    pub fn stats(&self) -> &SignatureStats {
        &self.stats
    }

    pub fn sigma(&self) -> &[Tgd] {
        &self.sigma
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    fn bound(&self) -> usize {
        self.stats.w_prime
    }

    fn compatible(&self, a: &Atom) -> bool {
        self.sig.is_side(a.rel) || self.patterns.contains_key(&(a.rel, a.pattern()))
    }

    /// Guard compatible with a Σ head and sides on at most `w′` elements.
    pub fn body_is_suitable(&self, key: &BodyKey) -> bool {
        self.patterns.contains_key(&(key.guard.rel, key.guard.pattern())) && key.side_elems().len() <= self.bound()
    }

    fn head_is_suitable(&self, h: &Atom) -> bool {
        h.vars().len() <= self.bound() && self.compatible(h)
    }

    /// Registers a body; returns its index. Call [`Saturation::run`] to complete it.
    pub fn demand(&mut self, key: BodyKey) -> usize {
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.entries.len();
        let mut heads = IndexMap::new();
        for a in key.atoms() {
            if a.vars().len() <= self.bound() {
                heads.insert(a, Derivation::Trivial);
            }
        }
        let suitable = self.body_is_suitable(&key);
        self.entries.push(Entry {
            facts: key.atoms().into_iter().collect(),
            key: key.clone(),
            heads,
            parents: IndexSet::new(),
            suitable,
        });
        self.index.insert(key, i);
        self.queued.push(true);
        self.queue.push_back(i);
        i
    }

    /// Runs the worklist until every demanded body is closed.
    pub fn run(&mut self) {
        while let Some(i) = self.queue.pop_front() {
            self.queued[i] = false;
            let before = self.entries[i].heads.len();
            self.process(i);
            if self.entries[i].heads.len() > before {
                let parents: Vec<usize> = self.entries[i].parents.iter().copied().collect();
                for p in parents {
                    if !self.queued[p] {
                        self.queued[p] = true;
                        self.queue.push_back(p);
                    }
                }
            }
        }
    }

    /// Makes the saturation drop its first derived head, for mutation testing.
    pub fn inject_fault(&mut self) {
        self.fault = Some(None);
    }

    fn add_head(&mut self, i: usize, h: Atom, d: Derivation) -> bool {
        if self.entries[i].facts.contains(&h) || !self.head_is_suitable(&h) {
            return false;
        }
        if let Some(f) = &mut self.fault {
            let me = (self.entries[i].key.clone(), h.clone());
            match f {
                None => {
                    *f = Some(me);
                    return false;
                }
                Some(dropped) if *dropped == me => return false,
                _ => {}
            }
        }
        let e = &mut self.entries[i];
        e.facts.insert(h.clone());
        e.heads.insert(h, d);
        true
    }

    fn process(&mut self, i: usize) {
        loop {
            let mut changed = false;
            for ri in 0..self.sigma.len() {
                let rule = &self.sigma[ri];
                let matches = find_homomorphisms(&rule.body, &self.entries[i].facts, &[]);
                if rule.is_full() {
                    let rule = rule.clone();
                    for m in matches {
                        let h = apply(&rule.head[0], &m);
                        let trigger = m[..rule.n_body_vars()].iter().map(|t| t.unwrap()).collect();
                        changed |= self.add_head(i, h, Derivation::Transitivity { rule: ri, trigger });
                    }
                } else {
                    let rule = rule.clone();
                    for m in matches {
                        changed |= self.child_step(i, ri, &rule, &m);
                    }
                }
            }
            if !changed {
                return;
            }
        }
    }

    /// Builds the child of a principal rule firing, demands it and lifts its heads.
    fn child_step(&mut self, i: usize, ri: usize, rule: &Tgd, m: &[Option<Term>]) -> bool {
        let nb = rule.n_body_vars();
        let mut s: Vec<Option<Term>> = m[..nb].to_vec();
        for k in 0..rule.n_vars() - nb {
            s.push(Some(Term::Null(k as u32)));
        }
        let head = apply(&rule.head[0], &s);
        let sides: Vec<Atom> = self.entries[i]
            .facts
            .iter()
            .filter(|f| self.sig.is_side(f.rel) && f.args.iter().all(|t| head.args.contains(t)))
            .cloned()
            .collect();
        let (key, elems) = canonicalize_guarded_set(&head, &sides).expect("sides are guarded by the head");
        let c = self.demand(key);
        self.entries[c].parents.insert(i);
        let trigger: Vec<Term> = m[..nb].iter().map(|t| t.unwrap()).collect();
        let child_heads: Vec<Atom> = self.entries[c].heads.keys().cloned().collect();
        let mut changed = false;
        for ch in child_heads {
            let lifted = instantiate(&ch, &elems);
            if lifted.args.iter().any(|t| matches!(t, Term::Null(_))) {
                continue;
            }
            changed |= self.add_head(
                i,
                lifted,
                Derivation::PrincipalTransitivity {
                    creator: ri,
                    trigger: trigger.clone(),
                    child: c,
                    child_head: ch,
                    elems: elems.clone(),
                },
            );
        }
        changed
    }

    /// Index of an already demanded body.
    pub fn lookup(&self, key: &BodyKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn key(&self, i: usize) -> &BodyKey {
        &self.entries[i].key
    }

    pub fn n_bodies(&self) -> usize {
        self.entries.len()
    }

    pub fn heads(&self, i: usize) -> impl Iterator<Item = &Atom> {
        self.entries[i].heads.keys()
    }

    /// Body atoms plus derived heads.
    pub fn closed_facts(&self, i: usize) -> &Instance {
        &self.entries[i].facts
    }

    pub fn derivation(&self, i: usize, head: &Atom) -> Option<&Derivation> {
        self.entries[i].heads.get(head)
    }

    pub fn is_closure_body(&self, i: usize) -> bool {
        self.entries[i].suitable
    }

    /// Demands the type of `principal` with `sides`, completes the worklist and
    /// returns the body index and the element values.
    pub fn demand_instance(&mut self, principal: &Atom, sides: &[Atom]) -> (usize, Vec<Term>) {
        let (key, elems) = canonicalize_guarded_set(principal, sides).expect("sides guarded by the principal fact");
        let i = self.demand(key);
        self.run();
        (i, elems)
    }

    /// All facts over the domain of `principal ∪ sides` derived by the saturation.
    pub fn consequences(&mut self, principal: &Atom, sides: &[Atom]) -> Vec<Atom> {
        let (i, elems) = self.demand_instance(principal, sides);
        self.entries[i].facts.iter().map(|a| instantiate(a, &elems)).collect()
    }

    /// The saturation as rules: one per (suitable body, head), trivial ones included.
    pub fn rules(&self) -> Vec<Tgd> {
        let mut out = Vec::new();
        for e in self.entries.iter().filter(|e| e.suitable) {
            for h in e.heads.keys() {
                out.push(Tgd::unnamed(e.key.atoms(), vec![h.clone()]));
            }
        }
        out
    }

    pub fn closure_size(&self) -> usize {
        self.entries.iter().filter(|e| e.suitable).map(|e| e.heads.len()).sum()
    }

    pub fn suitable_bound(&self) -> BigUint {
        suitable_count_bound(&self.stats, self.sigma.len())
    }

    /// True when the closure has `rule` (a single-head rule with a principal
    /// guard) up to variable renaming.
    pub fn closure_contains(&mut self, rule: &Tgd) -> bool {
        let Some(g) = rule.principal_guard(&self.sig) else { return false };
        let sides: Vec<Atom> = rule.body.iter().enumerate().filter(|&(i, _)| i != g).map(|(_, a)| a.clone()).collect();
        let Ok((key, elems)) = canonicalize_guarded_set(&rule.body[g], &sides) else { return false };
        let i = self.demand(key);
        self.run();
        let Some(head) = rule.head.first() else { return false };
        let mut ok = true;
        let head = head.map_terms(|t| match elems.iter().position(|e| *e == t) {
            Some(k) => Term::Var(k as u32),
            None => {
                ok = false;
                t
            }
        });
        ok && self.is_closure_body(i) && self.heads(i).any(|h| *h == head)
    }

    /// Applies the saturation rules (and nothing else) to `facts` until fixpoint.
    pub fn apply_to_fixpoint(&self, facts: &Instance) -> Instance {
        let rules = self.rules();
        let mut out = facts.clone();
        loop {
            let mut new = Vec::new();
            for r in &rules {
                for m in find_homomorphisms(&r.body, &out, &[]) {
                    let h = apply(&r.head[0], &m);
                    if !out.contains(&h) {
                        new.push(h);
                    }
                }
            }
            if new.is_empty() {
                return out;
            }
            out.extend(new);
        }
    }

    /// Rendered closure rules, for display and set comparison.
    pub fn render_rules(&self) -> Vec<String> {
        self.rules().iter().map(|r| crate::dsl::render_tgd(&self.sig, r)).collect()
    }

    /// Bodies as guarded patterns, for inspection.
    pub fn bodies(&self) -> impl Iterator<Item = &GuardedPattern> {
        self.entries.iter().map(|e| &e.key)
    }

    /// Heads that are not atoms of the body, over all suitable bodies.
    pub fn derived_rules(&self) -> HashSet<(BodyKey, Atom)> {
        self.entries
            .iter()
            .filter(|e| e.suitable)
            .flat_map(|e| {
                e.heads
                    .iter()
                    .filter(|(_, d)| !matches!(d, Derivation::Trivial))
                    .map(move |(h, _)| (e.key.clone(), h.clone()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_program, render_tgd};
    use crate::preprocess::normalize;

    pub(crate) const EX_SAT: &str = "rel P/5\nrel R/5\nrel S/1 side\nrel T/1 side\nrel U/1 side\n\
        tgd P(x,y1,y2,y3,z) -> R(x,y1,y2,y3,z)\n\
        tgd R(x,y1,y2,y3,z), S(x) -> T(y1)\n\
        tgd R(x,y1,y2,y3,z), S(x) -> T(y2)\n\
        tgd R(x,y1,y2,y3,z), S(x) -> T(y3)\n\
        tgd R(x,y1,y2,y3,z), T(y1), T(y2), T(y3) -> U(z)\n";

    pub(crate) const EX_PT: &str = "rel Q/4\nrel R/4\nrel Rp/3\nrel S/1 side\nrel T/1 side\nrel U/2 side\n\
        tgd Q(x1,x2,y1,y2) -> R(x1,x2,y1,y2)\n\
        tgd R(x1,x2,y1,y2), S(x1), S(x2) -> T(y1)\n\
        tgd R(x1,x2,y1,y2), S(x1), S(x2) -> T(y2)\n\
        tgd Rp(y1,y2,z), T(y1), T(y2) -> U(y1,y2)\n\
        tgd R(x1,x2,y1,y2), S(x1), S(x2) -> Rp(y1,y2,z)\n";

    fn closure_contains(text: &str, wanted: &str) -> bool {
        let p = parse_program(text).unwrap();
        let (n, _) = normalize(&p).unwrap();
        let mut s = Saturation::saturate(&n);
        let want = parse_program(&format!("{}\ntgd {wanted}", crate::dsl::render_signature(&n.sig))).unwrap().tgds[0].clone();
        s.closure_contains(&want)
    }

    #[test]
    fn transitivity_example() {
        assert!(closure_contains(EX_SAT, "R(x,y1,y2,y3,z), S(x) -> U(z)"));
    }

    #[test]
    fn principal_transitivity_example() {
        assert!(closure_contains(EX_PT, "R(x1,x2,y1,y2), S(x1), S(x2) -> U(y1,y2)"));
    }

    #[test]
    fn trivial_rule_in_child() {
        let text = "rel R/4\nrel Sx/4\nrel U1/1 side\nrel U2/1 side\nrel U3/1 side\nrel Q/4\n\
            tgd Q(x1,x2,x3,x4) -> R(x1,x2,x3,x4)\n\
            tgd R(x1,x2,x3,x4), U1(x4) -> Sx(x4,y1,y2,y3)\n\
            tgd Sx(x4,y1,y2,y3), U2(x4) -> U3(x4)\n";
        assert!(closure_contains(text, "R(x1,x2,x3,x4), U1(x4), U2(x4) -> U3(x4)"));
    }

    #[test]
    fn suitability() {
        let p = parse_program(
            "rel R/5\nrel S/2 side\nrel Q/5\ntgd Q(x1,x2,x3,x4,x5) -> R(x1,x2,x3,x4,x5)\n\
             tgd R(x1,x2,x3,x4,x5) -> S(x1,x2)\ntgd R(x1,x2,x3,x4,x5) -> S(x2,x1)\n\
             tgd R(x1,x2,x3,x4,x5), S(x1,x2), S(x2,x3), S(x3,x4) -> S(x4,x5)",
        )
        .unwrap();
        let narrow: Vec<Tgd> = p.tgds[1..].to_vec();
        let w = is_suitable(&p.tgds[3], &p.sig, &narrow);
        assert_eq!(w.breadth, Some(4));
        assert_eq!(w.bound, 2);
        assert!(!w.holds());
        let sat = parse_program(EX_SAT).unwrap();
        let derived = parse_program(&format!("{}tgd R(x,y1,y2,y3,z), S(x) -> U(z)", crate::dsl::render_signature(&sat.sig))).unwrap();
        let w = is_suitable(&derived.tgds[0], &sat.sig, &sat.tgds);
        assert!(w.holds());
        assert_eq!((w.width, w.breadth), (1, Some(1)));
        let triv = parse_program("rel R/2\nrel U/1 side\ntgd R(x,y) -> R(y,z)\ntgd R(x,y), U(x) -> R(x,y)").unwrap();
        assert!(is_suitable(&triv.tgds[1], &triv.sig, &triv.tgds).holds());
    }

    #[test]
    fn trivial_enumeration() {
        let p = parse_program("rel R/2\nrel U/1 side\ntgd R(x,y) -> R(y,z)\ntgd R(x,y), U(x) -> U(y)").unwrap();
        let rules: Vec<String> = enumerate_trivial_rules(&p.sig, &p.tgds).map(|r| render_tgd(&p.sig, &r)).collect();
        assert_eq!(rules, vec!["R(x1,x2) -> R(x1,x2)", "R(x1,x2), U(x1) -> R(x1,x2)", "R(x1,x2), U(x2) -> R(x1,x2)"]);
        let q = parse_program("rel R/2\nrel S/2\ntgd S(x,y) -> R(x,y)\ntgd S(x,x) -> R(x,x)").unwrap();
        let rules: Vec<String> = enumerate_trivial_rules(&q.sig, &q.tgds).map(|r| render_tgd(&q.sig, &r)).collect();
        assert_eq!(rules, vec!["R(x1,x2) -> R(x1,x2)", "R(x1,x1) -> R(x1,x1)"]);
    }

    #[test]
    fn count_bound() {
        let st = SignatureStats { a: 2, a_prime: 1, n_prime: 1, w: 1, w_prime: 1 };
        assert_eq!(suitable_count_bound(&st, 2), BigUint::from(216u32));
        let st = SignatureStats { a: 2, a_prime: 0, n_prime: 0, w: 1, w_prime: 1 };
        assert_eq!(suitable_count_bound(&st, 1), BigUint::from(27u32));
    }

    #[test]
    fn running_example_closure() {
        let p = parse_program("rel R/2\nrel U/1 side\ntgd R(x,y) -> R(y,z)\ntgd R(x,y), U(x) -> U(y)").unwrap();
        let (n, _) = normalize(&p).unwrap();
        let s = Saturation::saturate(&n);
        let rules = s.render_rules();
        assert!(rules.contains(&"R(x1,x2), U(x1) -> U(x2)".to_owned()), "{rules:?}");
        assert!(s.closure_size() as u64 <= 216);
    }

    #[test]
    fn only_non_full_rules_give_trivial_closure() {
        let p = parse_program("rel R/2\nrel S/2\ntgd R(x,y) -> S(y,z)").unwrap();
        let s = Saturation::saturate(&p);
        assert!(s.derived_rules().is_empty());
    }

    #[test]
    fn order_independent() {
        let p = parse_program(EX_PT).unwrap();
        let mut rev = p.clone();
        rev.tgds.reverse();
        let a: HashSet<String> = Saturation::saturate(&p).render_rules().into_iter().collect();
        let b: HashSet<String> = Saturation::saturate(&rev).render_rules().into_iter().collect();
        assert_eq!(a, b);
    }
}
