//! Turns a linear proof back into a tree-like chase run over the normalized
//! program: every type fact becomes a node holding the facts of its type, and
//! every saturation or fact-closure step is expanded into the Σ steps behind it.

use std::collections::HashMap;

use crate::chase::{check_proof, ChaseApplication, ChaseNode, ChaseRun, ChaseStep, ProofError, RuleRef, StepKind, Strategy};
use crate::factclosure::{FactClosureResult, FactJustification};
use crate::linear::LinearProof;
use crate::linearize::{LinFactOrigin, LinRuleOrigin, LinearProgram};
use crate::logic::{apply, bind_atom, canonicalize_guarded_set, instantiate, Atom, Cq, Instance, Term, Tgd};
use crate::saturate::{Derivation, Saturation};

/// A checked Σ-proof of a query.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub run: ChaseRun,
    pub matching: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CertificationFailure {
    #[error("cannot delinearize: {0}")]
    Reconstruction(String),
    #[error("delinearized run rejected: {0}")]
    Rejected(#[from] ProofError),
}

struct Builder<'a> {
    sigma: &'a [Tgd],
    sat: &'a Saturation,
    fc: &'a FactClosureResult,
    initial: Vec<Atom>,
    nodes: Vec<Instance>,
    parents: Vec<Option<usize>>,
    births: Vec<Option<usize>>,
    steps: Vec<ChaseStep>,
    next_null: u32,
    children: HashMap<ChildKey, (usize, Vec<Term>)>,
}

/// (node, rule, trigger, inherited facts).
type ChildKey = (usize, usize, Vec<Term>, Vec<Atom>);

type Res<T> = Result<T, String>;

impl Builder<'_> {
    fn push(&mut self, kind: StepKind, node: usize) {
        self.steps.push(ChaseStep { kind, recently_updated: node });
    }

    fn fire_full(&mut self, node: usize, rule: usize, trigger: Vec<Term>) -> Res<()> {
        let r = &self.sigma[rule];
        let s: Vec<Option<Term>> = trigger.iter().copied().map(Some).collect();
        for b in &r.body {
            if !self.nodes[node].contains(&apply(b, &s)) {
                return Err(format!("body of rule {rule} missing in node {node}"));
            }
        }
        let f = apply(&r.head[0], &s);
        if self.nodes[node].contains(&f) {
            return Ok(());
        }
        self.nodes[node].insert(f.clone());
        let app = ChaseApplication { rule: RuleRef::Sigma(rule), node, trigger, derived: vec![f], child: None, inherited: vec![] };
        self.push(StepKind::Chase(app), node);
        Ok(())
    }

    /// Fires the non-full `rule` in `node`, reusing an identical earlier child.
    fn fire_child(&mut self, node: usize, rule: usize, trigger: Vec<Term>, inherited: Vec<Atom>) -> Res<(usize, Atom, Vec<Term>)> {
        let r = &self.sigma[rule];
        let key = (node, rule, trigger.clone(), inherited.clone());
        let mut s: Vec<Option<Term>> = trigger.iter().copied().map(Some).collect();
        if let Some((c, nulls)) = self.children.get(&key) {
            s.extend(nulls.iter().copied().map(Some));
            return Ok((*c, apply(&r.head[0], &s), nulls.clone()));
        }
        for b in r.body.iter().map(|b| apply(b, &s)).chain(inherited.iter().cloned()) {
            if !self.nodes[node].contains(&b) {
                return Err(format!("premise {b:?} of rule {rule} missing in node {node}"));
            }
        }
        let nulls: Vec<Term> = r
            .existentials()
            .iter()
            .map(|_| {
                self.next_null += 1;
                Term::Null(self.next_null - 1)
            })
            .collect();
        s.extend(nulls.iter().copied().map(Some));
        let f = apply(&r.head[0], &s);
        let c = self.nodes.len();
        let mut facts = Instance::new();
        facts.insert(f.clone());
        facts.extend(inherited.iter().cloned());
        self.nodes.push(facts);
        self.parents.push(Some(node));
        self.births.push(Some(self.steps.len()));
        let app = ChaseApplication {
            rule: RuleRef::Sigma(rule),
            node,
            trigger,
            derived: vec![f.clone()],
            child: Some(c),
            inherited,
        };
        self.push(StepKind::Chase(app), node);
        self.children.insert(key, (c, nulls.clone()));
        Ok((c, f, nulls))
    }

    fn propagate(&mut self, from: usize, to: usize, f: Atom) {
        if !self.nodes[to].contains(&f) {
            self.nodes[to].insert(f.clone());
            self.push(StepKind::Propagation { facts: vec![f], from, to }, to);
        }
    }

    /// Makes the saturation head `head` of `body`, instantiated by `elems`,
    /// present in `node`, which must hold the body's atoms.
    fn expand(&mut self, node: usize, body: usize, head: &Atom, elems: &[Term]) -> Res<()> {
        let f = instantiate(head, elems);
        if self.nodes[node].contains(&f) {
            return Ok(());
        }
        let sat = self.sat;
        match sat.derivation(body, head) {
            None | Some(Derivation::Trivial) => Err(format!("body atom {f:?} absent from node {node}")),
            Some(Derivation::Transitivity { rule, trigger }) => {
                let s: Vec<Option<Term>> = trigger.iter().copied().map(Some).collect();
                for b in &self.sigma[*rule].body {
                    self.expand(node, body, &apply(b, &s), elems)?;
                }
                let vals = trigger.iter().map(|t| instantiate_term(*t, elems)).collect();
                self.fire_full(node, *rule, vals)
            }
            Some(Derivation::PrincipalTransitivity { creator, trigger, child, child_head, elems: celems }) => {
                let s: Vec<Option<Term>> = trigger.iter().copied().map(Some).collect();
                for b in &self.sigma[*creator].body {
                    self.expand(node, body, &apply(b, &s), elems)?;
                }
                let key_sides: Vec<Atom> = sat.key(*child).sides.iter().map(|a| instantiate(a, celems)).collect();
                for a in &key_sides {
                    self.expand(node, body, a, elems)?;
                }
                let inherited: Vec<Atom> = key_sides.iter().map(|a| instantiate(a, elems)).collect();
                let vals: Vec<Term> = trigger.iter().map(|t| instantiate_term(*t, elems)).collect();
                let (c, _, nulls) = self.fire_child(node, *creator, vals, inherited)?;
                let cvals: Vec<Term> = celems
                    .iter()
                    .map(|t| match *t {
                        Term::Var(j) => elems[j as usize],
                        Term::Null(k) => nulls[k as usize],
                        c => c,
                    })
                    .collect();
                self.expand(c, *child, child_head, &cvals)?;
                self.propagate(c, node, f);
                Ok(())
            }
        }
    }

    /// Makes a fact of the fact-saturated instance present at the root.
    fn ensure_root(&mut self, f: &Atom) -> Res<()> {
        if self.nodes[0].contains(f) {
            return Ok(());
        }
        let fc = self.fc;
        match fc.justifications.get(f) {
            None => Err(format!("{f:?} is not in the fact-saturated instance")),
            Some(FactJustification::Given) => Err(format!("given fact {f:?} missing from the root")),
            Some(FactJustification::Sigma { rule, trigger }) => {
                let s: Vec<Option<Term>> = trigger.iter().copied().map(Some).collect();
                for b in &self.sigma[*rule].body {
                    self.ensure_root(&apply(b, &s))?;
                }
                self.fire_full(0, *rule, trigger.clone())
            }
            Some(FactJustification::Closure { body, head, elems }) => {
                for a in self.sat.key(*body).atoms() {
                    self.ensure_root(&instantiate(&a, elems))?;
                }
                self.expand(0, *body, head, elems)
            }
            Some(FactJustification::Child { creator, trigger, child_body, child_head, elems }) => {
                let s: Vec<Option<Term>> = trigger.iter().copied().map(Some).collect();
                for b in &self.sigma[*creator].body {
                    self.ensure_root(&apply(b, &s))?;
                }
                let inherited: Vec<Atom> = self.sat.key(*child_body).sides.iter().map(|a| instantiate(a, elems)).collect();
                for a in &inherited {
                    self.ensure_root(a)?;
                }
                let (c, _, nulls) = self.fire_child(0, *creator, trigger.clone(), inherited)?;
                let cvals: Vec<Term> = elems
                    .iter()
                    .map(|t| match *t {
                        Term::Null(n) if n >= u32::MAX - 4096 => nulls[(u32::MAX - n) as usize],
                        o => o,
                    })
                    .collect();
                self.expand(c, *child_body, child_head, &cvals)?;
                self.propagate(c, 0, f.clone());
                Ok(())
            }
        }
    }
}

fn instantiate_term(t: Term, elems: &[Term]) -> Term {
    match t {
        Term::Var(v) => elems[v as usize],
        o => o,
    }
}

/// Rebuilds a Σ-run for `proof` of `q` over the linearized program and checks it.
pub fn certify(
    sigma: &[Tgd],
    initial: &Instance,
    sat: &Saturation,
    fc: &FactClosureResult,
    lin: &LinearProgram,
    proof: &LinearProof,
    q: &Cq,
) -> Result<Certificate, CertificationFailure> {
    let (run, matching) = build(sigma, initial, sat, fc, lin, proof, q).map_err(CertificationFailure::Reconstruction)?;
    check_proof(sigma, &[], &run, q, &matching)?;
    Ok(Certificate { run, matching })
}

fn build(
    sigma: &[Tgd],
    initial: &Instance,
    sat: &Saturation,
    fc: &FactClosureResult,
    lin: &LinearProgram,
    proof: &LinearProof,
    q: &Cq,
) -> Res<(ChaseRun, Vec<Term>)> {
    let max_null = initial
        .iter()
        .chain(fc.saturated.iter())
        .flat_map(|a| a.args.iter())
        .filter_map(|t| if let Term::Null(n) = t { (*n < u32::MAX - 4096).then_some(n + 1) } else { None })
        .max()
        .unwrap_or(0);
    let mut b = Builder {
        sigma,
        sat,
        fc,
        initial: initial.iter().cloned().collect(),
        nodes: vec![initial.clone()],
        parents: vec![None],
        births: vec![None],
        steps: Vec::new(),
        next_null: max_null,
        children: HashMap::new(),
    };
    let mut null_map: HashMap<Term, Term> = HashMap::new();
    let mut located: HashMap<Atom, (usize, Vec<Term>)> = HashMap::new();
    let to_sigma = |a: &Atom, m: &HashMap<Term, Term>| a.map_terms(|t| *m.get(&t).unwrap_or(&t));

    for st in &proof.steps {
        let rule = &lin.rules[st.rule];
        let s: Vec<Option<Term>> = st.trigger.iter().copied().map(Some).collect();
        let body_fact = apply(&rule.body[0], &s);
        let (node, _) = locate(&mut b, lin, &mut located, &mut null_map, &body_fact)?;
        let body_sigma = to_sigma(&body_fact, &null_map);
        let (body_atom, sat_body, key_elems) = match &lin.origins[st.rule] {
            LinRuleOrigin::Instantiate { body_atom, sat_body, key_elems, .. }
            | LinRuleOrigin::Lift { body_atom, sat_body, key_elems, .. } => (body_atom, *sat_body, key_elems),
        };
        let mut val: Vec<Option<Term>> = Vec::new();
        let n = body_atom.vars().into_iter().max().map_or(0, |v| v as usize + 1);
        val.resize(n.max(key_elems.iter().filter_map(Term::var).max().map_or(0, |v| v as usize + 1)), None);
        if !bind_atom(body_atom, &body_sigma, &mut val, &mut Vec::new()) {
            return Err("unfolding rule body does not fit its fact".into());
        }
        let kv: Vec<Term> = key_elems
            .iter()
            .map(|t| match t {
                Term::Var(e) => val[*e as usize].ok_or_else(|| "unbound type element".to_owned()),
                o => Ok(*o),
            })
            .collect::<Res<_>>()?;
        match &lin.origins[st.rule] {
            LinRuleOrigin::Instantiate { sat_head, .. } => {
                b.expand(node, sat_body, sat_head, &kv)?;
                let want = to_sigma(&st.fact, &null_map);
                if instantiate(sat_head, &kv) != want {
                    return Err("unfolded fact differs from the linear fact".into());
                }
            }
            LinRuleOrigin::Lift { delta, trigger, .. } => {
                let to_key = |t: Term| -> Term {
                    match key_elems.iter().position(|k| *k == t) {
                        Some(i) => Term::Var(i as u32),
                        None => t,
                    }
                };
                let d = &sigma[*delta];
                let dtrig_key: Vec<Term> = trigger.iter().map(|t| to_key(*t)).collect();
                let sk: Vec<Option<Term>> = dtrig_key.iter().copied().map(Some).collect();
                for a in &d.body {
                    b.expand(node, sat_body, &apply(a, &sk), &kv)?;
                }
                let exported: Vec<Term> = d.exported().iter().map(|&v| dtrig_key[v as usize]).collect();
                let inh_key: Vec<Atom> = sat
                    .closed_facts(sat_body)
                    .iter()
                    .filter(|f| sat.signature().is_side(f.rel) && f.args.iter().all(|t| exported.contains(t)))
                    .cloned()
                    .collect();
                for a in &inh_key {
                    b.expand(node, sat_body, a, &kv)?;
                }
                let inherited: Vec<Atom> = inh_key.iter().map(|a| instantiate(a, &kv)).collect();
                let dvals: Vec<Term> = dtrig_key.iter().map(|t| instantiate_term(*t, &kv)).collect();
                let (c, t_sigma, _) = b.fire_child(node, *delta, dvals, inherited.clone())?;
                bind_nulls(&st.fact, &t_sigma, &mut null_map)?;
                let (_, elems) = canonicalize_guarded_set(&t_sigma, &inherited).map_err(|_| "unguarded child".to_owned())?;
                located.insert(st.fact.clone(), (c, elems));
            }
        }
    }
    let matching: Vec<Term> = proof.matching.iter().map(|t| *null_map.get(t).unwrap_or(t)).collect();
    // Query atoms matched in the instance may still be missing at the root.
    let s: Vec<Option<Term>> = matching.iter().copied().map(Some).collect();
    for a in &q.atoms {
        let f = apply(a, &s);
        if !b.nodes.iter().any(|n| n.contains(&f)) {
            b.ensure_root(&f)?;
        }
    }
    Ok((finish(b), matching))
}

fn finish(b: Builder<'_>) -> ChaseRun {
    let nodes = b
        .nodes
        .into_iter()
        .enumerate()
        .map(|(id, facts)| ChaseNode { id, facts, parent: b.parents[id], birth: b.births[id] })
        .collect();
    let budget = b.steps.len();
    ChaseRun { strategy: Strategy::Tree, initial: b.initial, steps: b.steps, nodes, budget, exhausted: false }
}

fn bind_nulls(lin_fact: &Atom, sigma_fact: &Atom, null_map: &mut HashMap<Term, Term>) -> Res<()> {
    if lin_fact.args.len() != sigma_fact.args.len() {
        return Err("lifted fact has the wrong arity".into());
    }
    for (l, s) in lin_fact.args.iter().zip(&sigma_fact.args) {
        let got = *null_map.entry(*l).or_insert(*s);
        if got != *s && !(l == s && !matches!(l, Term::Null(_))) {
            return Err("inconsistent null correspondence".into());
        }
    }
    Ok(())
}

/// Node holding the type of the type fact `f`, creating it for instance facts.
fn locate(
    b: &mut Builder<'_>,
    lin: &LinearProgram,
    located: &mut HashMap<Atom, (usize, Vec<Term>)>,
    null_map: &mut HashMap<Term, Term>,
    f: &Atom,
) -> Res<(usize, Vec<Term>)> {
    if let Some(x) = located.get(f) {
        return Ok(x.clone());
    }
    let out = match lin.fact_origins.get(f) {
        Some(LinFactOrigin::Root { ty, elems }) => {
            let (t, _) = lin.catalog.types.get_index(*ty).unwrap();
            for a in t.atoms() {
                b.ensure_root(&instantiate(&a, elems))?;
            }
            (0, elems.clone())
        }
        Some(LinFactOrigin::RootLift(k)) => {
            let rl = &lin.root_lifts[*k];
            let d = &b.sigma[rl.delta];
            let s: Vec<Option<Term>> = rl.trigger.iter().copied().map(Some).collect();
            for a in &d.body {
                b.ensure_root(&apply(a, &s))?;
            }
            let t = lin.catalog.type_of(f.rel).map(|(_, t)| t.clone()).ok_or("unknown type relation")?;
            let mut ev: Vec<Option<Term>> = vec![None; t.n_elems()];
            bind_atom(&t.guard, &Atom::new(t.guard.rel, f.args.clone()), &mut ev, &mut Vec::new());
            let inherited: Vec<Atom> = t.sides.iter().map(|a| apply(a, &ev)).collect();
            for a in &inherited {
                b.ensure_root(a)?;
            }
            let (c, t_sigma, _) = b.fire_child(0, rl.delta, rl.trigger.clone(), inherited.clone())?;
            bind_nulls(f, &t_sigma, null_map)?;
            let (_, elems) = canonicalize_guarded_set(&t_sigma, &inherited).map_err(|_| "unguarded child".to_owned())?;
            (c, elems)
        }
        None => return Err(format!("type fact {f:?} has no origin")),
    };
    located.insert(f.clone(), out.clone());
    Ok(out)
}
