//! Fact saturation of an instance through a one-level truncated chase that
//! summarizes every child by its saturated type.

use std::collections::{HashMap, HashSet, VecDeque};

use indexmap::IndexMap;
use num_bigint::BigUint;

use crate::logic::{apply, bind_atom, canonicalize_guarded_set, find_homomorphisms, instantiate, Atom, Instance, Term, Tgd};
use crate::saturate::Saturation;

/// Why a fact belongs to the fact-saturated instance.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum FactJustification {
    Given,
    /// A full Σ rule fired at the root.
    Sigma { rule: usize, trigger: Vec<Term> },
    /// A saturation body matched at the root: `elems` instantiates the body's elements.
    Closure { body: usize, head: Atom, elems: Vec<Term> },
    /// Lifted from the child created by the principal Σ rule `creator`.
    Child { creator: usize, trigger: Vec<Term>, child_body: usize, child_head: Atom, elems: Vec<Term> },
}

/// Placeholder for an invented child value; never collides with input nulls.
fn placeholder(k: usize) -> Term {
    Term::Null(u32::MAX - k as u32)
}

fn is_placeholder(t: &Term) -> bool {
    matches!(t, Term::Null(n) if *n >= u32::MAX - 4096)
}

#[derive(Clone, Debug)]
pub struct FactClosureResult {
    pub saturated: Instance,
    pub added: Vec<Atom>,
    pub justifications: IndexMap<Atom, FactJustification>,
    /// Distinct children: (creator rule, child body, element values).
    pub children: IndexMap<(usize, usize, Vec<Term>), Vec<Atom>>,
    pub child_bound: BigUint,
}

struct Closer<'a> {
    sat: &'a mut Saturation,
    sigma: Vec<Tgd>,
    inst: Instance,
    by_value: HashMap<Term, Vec<usize>>,
    just: IndexMap<Atom, FactJustification>,
    queue: VecDeque<usize>,
    queued: HashSet<usize>,
    children: IndexMap<(usize, usize, Vec<Term>), Vec<Atom>>,
}

impl Closer<'_> {
    fn add(&mut self, f: Atom, j: FactJustification) {
        if self.inst.contains(&f) {
            return;
        }
        self.inst.insert(f.clone());
        let idx = self.inst.len() - 1;
        let mut seen = Vec::new();
        for v in &f.args {
            if !seen.contains(v) {
                seen.push(*v);
                self.by_value.entry(*v).or_default().push(idx);
            }
        }
        self.just.insert(f.clone(), j);
        if self.sat.signature().is_principal(f.rel) {
            self.enqueue(idx);
        } else if let Some(first) = f.args.first() {
            // Principal facts guarding the new side fact see a new type.
            let cands: Vec<usize> = self.by_value.get(first).cloned().unwrap_or_default();
            for c in cands {
                let g = self.inst.get(c);
                if self.sat.signature().is_principal(g.rel) && f.args.iter().all(|v| g.args.contains(v)) {
                    self.enqueue(c);
                }
            }
        }
    }

    fn enqueue(&mut self, idx: usize) {
        if self.queued.insert(idx) {
            self.queue.push_back(idx);
        }
    }

    /// Side facts whose values all lie in `vals`.
    fn side_facts_over(&self, vals: &[Term]) -> Vec<Atom> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for v in vals {
            for &i in self.by_value.get(v).map_or(&[][..], |v| v.as_slice()) {
                let f = self.inst.get(i);
                if self.sat.signature().is_side(f.rel) && f.args.iter().all(|t| vals.contains(t)) && seen.insert(i) {
                    out.push(f.clone());
                }
            }
        }
        out
    }

    fn process(&mut self, idx: usize) {
        let fact = self.inst.get(idx).clone();
        let vals = fact.terms();
        let sides = self.side_facts_over(&vals);
        // Σ rules guarded by this fact.
        for ri in 0..self.sigma.len() {
            let rule = self.sigma[ri].clone();
            let Some(g) = rule.principal_guard(self.sat.signature()) else { continue };
            let mut seed = vec![None; rule.n_body_vars()];
            if !bind_atom(&rule.body[g], &fact, &mut seed, &mut Vec::new()) {
                continue;
            }
            for m in find_homomorphisms(&rule.body, &self.inst, &seed) {
                let trigger: Vec<Term> = m[..rule.n_body_vars()].iter().map(|t| t.unwrap()).collect();
                if rule.is_full() {
                    let h = apply(&rule.head[0], &m);
                    self.add(h, FactJustification::Sigma { rule: ri, trigger });
                } else {
                    self.child(ri, &rule, trigger);
                }
            }
        }
        // Saturation bodies matched on this fact with sides on ≤ w′ of its values.
        let w = self.sat.stats().w_prime;
        for size in 0..=w.min(vals.len()) {
            for subset in subsets(&vals, size) {
                let on: Vec<Atom> = sides.iter().filter(|f| f.args.iter().all(|t| subset.contains(t))).cloned().collect();
                if size > 0 && !subset.iter().all(|v| on.iter().any(|f| f.args.contains(v))) {
                    continue;
                }
                let (key, elems) = canonicalize_guarded_set(&fact, &on).expect("guarded");
                if !self.sat.body_is_suitable(&key) {
                    continue;
                }
                let (body, _) = self.sat.demand_instance(&fact, &on);
                let heads: Vec<Atom> = self.sat.heads(body).cloned().collect();
                for h in heads {
                    let f = instantiate(&h, &elems);
                    self.add(f, FactJustification::Closure { body, head: h, elems: elems.clone() });
                }
            }
        }
    }

    fn child(&mut self, ri: usize, rule: &Tgd, trigger: Vec<Term>) {
        let mut s: Vec<Option<Term>> = trigger.iter().copied().map(Some).collect();
        for k in 0..rule.n_vars() - rule.n_body_vars() {
            s.push(Some(placeholder(k)));
        }
        let head = apply(&rule.head[0], &s);
        let exported: Vec<Term> = head.terms().into_iter().filter(|t| !is_placeholder(t)).collect();
        let inherited = self.side_facts_over(&exported);
        let (body, elems) = self.sat.demand_instance(&head, &inherited);
        let label = (ri, body, elems.clone());
        let heads: Vec<Atom> = self.sat.heads(body).cloned().collect();
        let mut lifted = Vec::new();
        for h in heads {
            let f = instantiate(&h, &elems);
            if f.args.iter().any(is_placeholder) {
                continue;
            }
            lifted.push(f.clone());
            self.add(
                f,
                FactJustification::Child {
                    creator: ri,
                    trigger: trigger.clone(),
                    child_body: body,
                    child_head: h,
                    elems: elems.clone(),
                },
            );
        }
        self.children.insert(label, lifted);
    }
}

fn subsets(vals: &[Term], size: usize) -> Vec<Vec<Term>> {
    fn go(i: usize, vals: &[Term], size: usize, cur: &mut Vec<Term>, out: &mut Vec<Vec<Term>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for j in i..vals.len() {
            cur.push(vals[j]);
            go(j + 1, vals, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, vals, size, &mut Vec::new(), &mut out);
    out
}

/// `|Adom|^a · |Σ| · (a+1)^{w′} · 2^{n′·w′^{a′}}`: distinct children the truncated chase may create.
pub fn child_count_bound(sat: &Saturation, adom: usize) -> BigUint {
    let st = sat.stats();
    let two = BigUint::from(1u32) << (st.n_prime * st.w_prime.pow(st.a_prime as u32));
    BigUint::from(adom.max(1)).pow(st.a as u32)
        * BigUint::from(sat.sigma().len().max(1))
        * BigUint::from(st.a + 1).pow(st.w_prime as u32)
        * two
}

/// Computes a Σ-fact-saturated superinstance of `instance` over the same domain.
pub fn fact_saturate(sat: &mut Saturation, instance: &Instance) -> FactClosureResult {
    let sigma = sat.sigma().to_vec();
    let mut c = Closer {
        sat,
        sigma,
        inst: Instance::new(),
        by_value: HashMap::new(),
        just: IndexMap::new(),
        queue: VecDeque::new(),
        queued: HashSet::new(),
        children: IndexMap::new(),
    };
    for f in instance.iter() {
        c.add(f.clone(), FactJustification::Given);
    }
    while let Some(idx) = c.queue.pop_front() {
        c.queued.remove(&idx);
        c.process(idx);
    }
    let added: Vec<Atom> = c.inst.iter().filter(|f| !instance.contains(f)).cloned().collect();
    let child_bound = child_count_bound(c.sat, instance.adom().len());
    assert!(BigUint::from(c.children.len()) <= child_bound, "child count exceeds its bound");
    FactClosureResult { saturated: c.inst, added, justifications: c.just, children: c.children, child_bound }
}

/// True when fact saturation adds nothing.
pub fn is_fact_saturated(sat: &mut Saturation, instance: &Instance) -> bool {
    fact_saturate(sat, instance).added.is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_program, render_fact};
    use crate::preprocess::normalize;

    fn ex9() -> crate::dsl::Program {
        let p = parse_program("rel R/2\nrel U/1 side\ntgd R(x,y) -> R(y,z)\ntgd R(x,y), U(x) -> U(y)\nfact R(a,b)\nfact U(a)").unwrap();
        normalize(&p).unwrap().0
    }

    #[test]
    fn running_example_adds_u_b() {
        let p = ex9();
        let mut sat = Saturation::saturate(&p);
        let r = fact_saturate(&mut sat, &p.instance);
        let added: Vec<String> = r.added.iter().map(|f| render_fact(&p.sig, f)).collect();
        assert_eq!(added, vec!["U(b)"]);
        assert!(!is_fact_saturated(&mut sat, &p.instance));
        assert!(is_fact_saturated(&mut sat, &r.saturated));
        assert!(is_fact_saturated(&mut sat, &Instance::new()));
    }

    #[test]
    fn no_triggers_no_change() {
        let p = parse_program("rel R/2\nrel S/2\ntgd S(x,y) -> R(x,y)\nfact R(a,b)").unwrap();
        let mut sat = Saturation::saturate(&p);
        assert!(fact_saturate(&mut sat, &p.instance).added.is_empty());
    }

    #[test]
    fn facts_come_back_from_children() {
        let p = parse_program(
            "rel R/2\nrel S/2\nrel U/1 side\ntgd R(x,y) -> S(y,z)\ntgd S(x,y) -> U(x)\nfact R(a,b)",
        )
        .unwrap();
        let (n, _) = normalize(&p).unwrap();
        let mut sat = Saturation::saturate(&n);
        let r = fact_saturate(&mut sat, &n.instance);
        let added: Vec<String> = r.added.iter().map(|f| render_fact(&n.sig, f)).collect();
        assert_eq!(added, vec!["U(b)"]);
        assert!(matches!(r.justifications[&r.added[0]], FactJustification::Child { .. }));
        // The second child inherits U(b).
        assert_eq!(r.children.len(), 2);
    }
}
