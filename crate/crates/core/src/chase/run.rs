use std::collections::{HashMap, HashSet, VecDeque};

use crate::dsl::Program;
use crate::logic::{apply, find_homomorphisms, first_hom, first_hom_through, Atom, Cq, Instance, Term, Tgd};

use super::{
    guarded_by, guarded_in, ChaseApplication, ChaseNode, ChaseRun, ChaseStep, OracleVerdict, RuleRef, StepKind,
    Strategy,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IllegalStrategyInput {
    #[error("the shortcut chase needs a saturation")]
    MissingSaturation,
    #[error("rule {0} is not single-headed with a principal guard")]
    NotNormalized(usize),
    #[error("saturation rule {0} is not full")]
    NonFullSaturation(usize),
}

struct State<'a> {
    p: &'a Program,
    closure: &'a [Tgd],
    run: ChaseRun,
    union: Instance,
    values: HashSet<Term>,
    /// Value → nodes containing it.
    by_value: HashMap<Term, Vec<usize>>,
    next_null: u32,
    query: Option<&'a Cq>,
    found: Option<Vec<Term>>,
}

impl<'a> State<'a> {
    fn new(p: &'a Program, closure: &'a [Tgd], strategy: Strategy, budget: usize, query: Option<&'a Cq>) -> State<'a> {
        let next_null = p
            .instance
            .iter()
            .flat_map(|a| a.args.iter())
            .filter_map(|t| if let Term::Null(n) = t { Some(n + 1) } else { None })
            .max()
            .unwrap_or(0);
        let mut st = State {
            p,
            closure,
            run: ChaseRun {
                strategy,
                initial: p.instance.iter().cloned().collect(),
                steps: Vec::new(),
                nodes: vec![ChaseNode { id: 0, facts: Instance::new(), parent: None, birth: None }],
                budget,
                exhausted: false,
            },
            union: Instance::new(),
            values: HashSet::new(),
            by_value: HashMap::new(),
            next_null,
            query,
            found: None,
        };
        for f in p.instance.iter() {
            st.insert(0, f.clone());
        }
        if let Some(q) = query {
            st.found = first_hom(&q.atoms, &st.union, &[]).map(|s| s.into_iter().map(Option::unwrap).collect());
        }
        st
    }

    fn rule(&self, r: RuleRef) -> &'a Tgd {
        r.resolve(&self.p.tgds, self.closure).expect("rule reference")
    }

    fn out_of_budget(&mut self) -> bool {
        if self.run.steps.len() >= self.run.budget {
            self.run.exhausted = true;
            true
        } else {
            false
        }
    }

    /// Inserts into a node; returns whether the fact is new to the whole tree.
    fn insert(&mut self, node: usize, f: Atom) -> bool {
        for v in &f.args {
            self.values.insert(*v);
            let nodes = self.by_value.entry(*v).or_default();
            if nodes.last() != Some(&node) && !nodes.contains(&node) {
                nodes.push(node);
            }
        }
        self.run.nodes[node].facts.insert(f.clone());
        let fresh = self.union.insert(f.clone());
        if fresh && self.found.is_none() {
            if let Some(q) = self.query {
                self.found = first_hom_through(&q.atoms, &self.union, &f).map(|s| s.into_iter().map(Option::unwrap).collect());
            }
        }
        fresh
    }

    fn fresh_null(&mut self) -> Term {
        let t = Term::Null(self.next_null);
        self.next_null += 1;
        t
    }

    /// Applies the head to a body match, inventing nulls for existentials.
    fn derive(&mut self, rule: &Tgd, body_match: &[Option<Term>]) -> (Vec<Term>, Vec<Atom>) {
        let nb = rule.n_body_vars();
        let trigger: Vec<Term> = body_match[..nb].iter().map(|t| t.expect("bound body variable")).collect();
        let mut s: Vec<Option<Term>> = trigger.iter().copied().map(Some).collect();
        for _ in nb..rule.n_vars() {
            let n = self.fresh_null();
            s.push(Some(n));
        }
        let derived = rule.head.iter().map(|a| apply(a, &s)).collect();
        (trigger, derived)
    }

    fn seed(rule: &Tgd, body_match: &[Option<Term>]) -> Vec<Option<Term>> {
        let mut s = body_match.to_vec();
        s.resize(rule.n_vars(), None);
        s
    }

    fn new_child(&mut self, parent: usize, derived: &[Atom], inherited: &[Atom]) -> usize {
        let id = self.run.nodes.len();
        self.run.nodes.push(ChaseNode {
            id,
            facts: Instance::new(),
            parent: Some(parent),
            birth: Some(self.run.steps.len()),
        });
        for f in derived.iter().chain(inherited) {
            self.insert(id, f.clone());
        }
        id
    }

    fn inheritable(&self, node: usize, derived: &[Atom], side_only: bool) -> Vec<Atom> {
        self.run.nodes[node]
            .facts
            .iter()
            .filter(|f| guarded_by(f, derived) && !derived.contains(f))
            .filter(|f| !side_only || self.p.sig.is_side(f.rel))
            .cloned()
            .collect()
    }

    fn push(&mut self, kind: StepKind, recently_updated: usize) {
        self.run.steps.push(ChaseStep { kind, recently_updated });
    }

    /// Nodes other than `except` where `f` is guarded and absent.
    fn propagation_targets(&self, f: &Atom, except: usize) -> Vec<usize> {
        let Some(first) = f.args.first() else { return vec![] };
        let mut out = Vec::new();
        for &n in self.by_value.get(first).map_or(&[][..], |v| v.as_slice()) {
            if n == except || out.contains(&n) {
                continue;
            }
            let facts = &self.run.nodes[n].facts;
            if !facts.contains(f) && guarded_in(f, facts) {
                out.push(n);
            }
        }
        out
    }
}

fn check_normalized(p: &Program) -> Result<(), IllegalStrategyInput> {
    for (i, r) in p.tgds.iter().enumerate() {
        if r.head.len() != 1 || r.principal_guard(&p.sig).is_none() {
            return Err(IllegalStrategyInput::NotNormalized(i));
        }
    }
    Ok(())
}

/// Runs the chase with the given strategy. `saturation` supplies extra full
/// rules, required by the shortcut strategy.
pub fn run_chase(
    p: &Program,
    strategy: Strategy,
    saturation: Option<&[Tgd]>,
    budget: usize,
) -> Result<ChaseRun, IllegalStrategyInput> {
    run_chase_with_query(p, strategy, saturation, budget, None).map(|(run, _)| run)
}

/// Like [`run_chase`] but stops as soon as `query` has a match in the tree.
pub fn run_chase_with_query(
    p: &Program,
    strategy: Strategy,
    saturation: Option<&[Tgd]>,
    budget: usize,
    query: Option<&Cq>,
) -> Result<(ChaseRun, Option<Vec<Term>>), IllegalStrategyInput> {
    let closure = saturation.unwrap_or(&[]);
    match strategy {
        Strategy::Tree => {}
        Strategy::OnePass => {}
        Strategy::PrincipalExempt => check_normalized(p)?,
        Strategy::Shortcut => {
            check_normalized(p)?;
            if saturation.is_none() {
                return Err(IllegalStrategyInput::MissingSaturation);
            }
            if let Some(i) = closure.iter().position(|r| !r.is_full()) {
                return Err(IllegalStrategyInput::NonFullSaturation(i));
            }
        }
    }
    let mut st = State::new(p, closure, strategy, budget, query);
    if st.found.is_none() {
        match strategy {
            Strategy::Tree => tree(&mut st),
            Strategy::OnePass => one_pass(&mut st, false),
            Strategy::PrincipalExempt => one_pass(&mut st, true),
            Strategy::Shortcut => shortcut(&mut st),
        }
    }
    Ok((st.run, st.found))
}

/// Fair FIFO over nodes; facts are eagerly propagated to every node where
/// they are guarded, so every body match lies within a single node.
fn tree(st: &mut State) {
    let mut queue = VecDeque::from([0usize]);
    let mut queued = vec![true];
    let enqueue = |n: usize, queue: &mut VecDeque<usize>, queued: &mut Vec<bool>| {
        if queued.len() <= n {
            queued.resize(n + 1, false);
        }
        if !queued[n] {
            queued[n] = true;
            queue.push_back(n);
        }
    };
    while let Some(v) = queue.pop_front() {
        queued[v] = false;
        for ri in 0..st.p.tgds.len() {
            let rule = st.rule(RuleRef::Sigma(ri));
            let matches = find_homomorphisms(&rule.body, &st.run.nodes[v].facts, &[]);
            for m in matches {
                if st.found.is_some() || st.out_of_budget() {
                    return;
                }
                if rule.is_full() {
                    let s = State::seed(rule, &m);
                    let derived: Vec<Atom> = rule.head.iter().map(|a| apply(a, &s)).collect();
                    if derived.iter().all(|f| st.union.contains(f)) {
                        continue;
                    }
                    let (trigger, derived) = st.derive(rule, &m);
                    st.push(
                        StepKind::Chase(ChaseApplication {
                            rule: RuleRef::Sigma(ri),
                            node: v,
                            trigger,
                            derived: derived.clone(),
                            child: None,
                            inherited: vec![],
                        }),
                        v,
                    );
                    for f in &derived {
                        st.insert(v, f.clone());
                    }
                    enqueue(v, &mut queue, &mut queued);
                    for f in derived {
                        for t in st.propagation_targets(&f, v) {
                            if st.out_of_budget() {
                                return;
                            }
                            st.push(StepKind::Propagation { facts: vec![f.clone()], from: v, to: t }, t);
                            st.insert(t, f.clone());
                            enqueue(t, &mut queue, &mut queued);
                        }
                    }
                } else {
                    if first_hom(&rule.head, &st.union, &State::seed(rule, &m)).is_some() {
                        continue;
                    }
                    let (trigger, derived) = st.derive(rule, &m);
                    let inherited = st.inheritable(v, &derived, false);
                    let step = StepKind::Chase(ChaseApplication {
                        rule: RuleRef::Sigma(ri),
                        node: v,
                        trigger,
                        derived: derived.clone(),
                        child: Some(st.run.nodes.len()),
                        inherited: inherited.clone(),
                    });
                    let child = st.new_child(v, &derived, &inherited);
                    st.push(step, child);
                    enqueue(child, &mut queue, &mut queued);
                }
            }
        }
    }
}

/// One-pass discipline: propagate one fact to the parent whenever possible,
/// otherwise apply the first applicable step on the recently updated node.
/// With `exempt`, only side facts move between nodes and full rules with a
/// principal head fire as relaxed steps.
fn one_pass(st: &mut State, exempt: bool) {
    let mut cur = 0usize;
    let mut fired: HashSet<(usize, usize, Vec<Term>)> = HashSet::new();
    // In-place full steps before child creation, so a node is closed before the run descends.
    let in_place = |ri: usize| {
        let r = &st.p.tgds[ri];
        r.is_full() && !(exempt && r.head.iter().any(|a| st.p.sig.is_principal(a.rel)))
    };
    let order: Vec<usize> =
        (0..st.p.tgds.len()).filter(|&ri| in_place(ri)).chain((0..st.p.tgds.len()).filter(|&ri| !in_place(ri))).collect();
    'outer: loop {
        if st.found.is_some() || st.out_of_budget() {
            return;
        }
        if let Some(parent) = st.run.nodes[cur].parent {
            let pf = &st.run.nodes[parent].facts;
            let candidate = st.run.nodes[cur]
                .facts
                .iter()
                .find(|f| (!exempt || st.p.sig.is_side(f.rel)) && !pf.contains(f) && guarded_in(f, pf))
                .cloned();
            if let Some(f) = candidate {
                st.push(StepKind::Propagation { facts: vec![f.clone()], from: cur, to: parent }, parent);
                st.insert(parent, f);
                cur = parent;
                continue;
            }
        }
        for &ri in &order {
            let rule = st.rule(RuleRef::Sigma(ri));
            for m in find_homomorphisms(&rule.body, &st.run.nodes[cur].facts, &[]) {
                let node_facts = &st.run.nodes[cur].facts;
                let s = State::seed(rule, &m);
                let key = (cur, ri, m[..rule.n_body_vars()].iter().map(|t| t.unwrap()).collect::<Vec<_>>());
                let relaxed = exempt && rule.is_full() && rule.head.iter().any(|a| st.p.sig.is_principal(a.rel));
                if rule.is_full() && !relaxed {
                    let derived: Vec<Atom> = rule.head.iter().map(|a| apply(a, &s)).collect();
                    if derived.iter().all(|f| node_facts.contains(f)) {
                        continue;
                    }
                    let (trigger, derived) = st.derive(rule, &m);
                    st.push(
                        StepKind::Chase(ChaseApplication {
                            rule: RuleRef::Sigma(ri),
                            node: cur,
                            trigger,
                            derived: derived.clone(),
                            child: None,
                            inherited: vec![],
                        }),
                        cur,
                    );
                    for f in derived {
                        st.insert(cur, f);
                    }
                    continue 'outer;
                }
                if fired.contains(&key) || (!relaxed && first_hom(&rule.head, node_facts, &s).is_some()) {
                    continue;
                }
                fired.insert(key);
                let (trigger, derived) = st.derive(rule, &m);
                let inherited = st.inheritable(cur, &derived, exempt);
                let app = ChaseApplication {
                    rule: RuleRef::Sigma(ri),
                    node: cur,
                    trigger,
                    derived: derived.clone(),
                    child: Some(st.run.nodes.len()),
                    inherited: inherited.clone(),
                };
                let child = st.new_child(cur, &derived, &inherited);
                st.push(if relaxed { StepKind::RelaxedChase(app) } else { StepKind::Chase(app) }, child);
                cur = child;
                continue 'outer;
            }
        }
        return;
    }
}

/// Saturates each node once with the full rules and the saturation, then
/// fires non-full rules into children that inherit every guarded fact.
fn shortcut(st: &mut State) {
    let full: Vec<RuleRef> = (0..st.p.tgds.len())
        .filter(|&i| st.p.tgds[i].is_full())
        .map(RuleRef::Sigma)
        .chain((0..st.closure.len()).map(RuleRef::Closure))
        .collect();
    let mut queue = VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        let mut changed = true;
        while changed {
            changed = false;
            for &r in &full {
                let rule = st.rule(r);
                for m in find_homomorphisms(&rule.body, &st.run.nodes[v].facts, &[]) {
                    if st.found.is_some() || st.out_of_budget() {
                        return;
                    }
                    let s = State::seed(rule, &m);
                    let derived: Vec<Atom> = rule.head.iter().map(|a| apply(a, &s)).collect();
                    if derived.iter().all(|f| st.run.nodes[v].facts.contains(f)) {
                        continue;
                    }
                    let (trigger, derived) = st.derive(rule, &m);
                    st.push(
                        StepKind::Chase(ChaseApplication {
                            rule: r,
                            node: v,
                            trigger,
                            derived: derived.clone(),
                            child: None,
                            inherited: vec![],
                        }),
                        v,
                    );
                    for f in derived {
                        st.insert(v, f);
                    }
                    changed = true;
                }
            }
        }
        for ri in 0..st.p.tgds.len() {
            let rule = st.rule(RuleRef::Sigma(ri));
            if rule.is_full() {
                continue;
            }
            for m in find_homomorphisms(&rule.body, &st.run.nodes[v].facts, &[]) {
                if st.found.is_some() || st.out_of_budget() {
                    return;
                }
                if first_hom(&rule.head, &st.run.nodes[v].facts, &State::seed(rule, &m)).is_some() {
                    continue;
                }
                let (trigger, derived) = st.derive(rule, &m);
                let inherited = st.inheritable(v, &derived, false);
                let step = StepKind::Chase(ChaseApplication {
                    rule: RuleRef::Sigma(ri),
                    node: v,
                    trigger,
                    derived: derived.clone(),
                    child: Some(st.run.nodes.len()),
                    inherited: inherited.clone(),
                });
                let child = st.new_child(v, &derived, &inherited);
                st.push(step, child);
                queue.push_back(child);
            }
        }
    }
}

/// Sound, budgeted entailment check through the tree strategy.
pub fn bounded_entailment_oracle(p: &Program, q: &Cq, budget: usize) -> OracleVerdict {
    let (run, found) = run_chase_with_query(p, Strategy::Tree, None, budget, Some(q)).expect("tree chase accepts any program");
    match found {
        Some(matching) => OracleVerdict::Entailed { matching, run },
        None => OracleVerdict::Unknown { terminated: !run.exhausted },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chase::{check_one_pass_discipline, check_proof, check_shortcut_discipline};
    use crate::dsl::{parse_program, render_fact};

    const EX9: &str = "rel R/2\nrel U/1 side\ntgd R(x,y) -> R(y,z)\ntgd R(x,y), U(x) -> U(y)\nfact R(a,b)\nfact U(a)\nquery R(x,y), R(y,z), U(z)";

    fn node_facts(p: &Program, run: &ChaseRun, n: usize) -> Vec<String> {
        run.nodes[n].facts.iter().map(|f| render_fact(&p.sig, f)).collect()
    }

    #[test]
    fn empty_rule_set() {
        let p = parse_program("rel R/2\nfact R(a,b)").unwrap();
        for s in [Strategy::Tree, Strategy::OnePass, Strategy::PrincipalExempt] {
            let run = run_chase(&p, s, None, 10).unwrap();
            assert!(run.steps.is_empty());
            assert_eq!(run.nodes.len(), 1);
            assert!(!run.exhausted);
        }
    }

    #[test]
    fn oracle_on_running_example() {
        let p = parse_program(EX9).unwrap();
        let v = bounded_entailment_oracle(&p, &p.queries[0], 50);
        let OracleVerdict::Entailed { matching, run } = v else { panic!("expected a match") };
        assert_eq!(matching[0], Term::Const(crate::logic::Sym::new("a")));
        assert!(check_proof(&p.tgds, &[], &run, &p.queries[0], &matching).is_ok());
    }

    #[test]
    fn oracle_trivial_cases() {
        let p = parse_program("rel R/2\nrel S/1\ntgd R(x,y) -> R(y,z)\nfact R(a,b)\nquery S(x)\nquery R(x,y)").unwrap();
        assert!(matches!(bounded_entailment_oracle(&p, &p.queries[0], 100), OracleVerdict::Unknown { terminated: false }));
        let OracleVerdict::Entailed { run, .. } = bounded_entailment_oracle(&p, &p.queries[1], 100) else { panic!() };
        assert!(run.steps.is_empty());
        let fin = parse_program("rel R/2\nrel S/1\ntgd R(x,y) -> S(x)\nfact R(a,b)\nquery R(x,x)").unwrap();
        assert!(bounded_entailment_oracle(&fin, &fin.queries[0], 100).is_certain_no());
    }

    #[test]
    fn shortcut_on_running_example() {
        let p = parse_program(EX9).unwrap();
        let sat = vec![p.tgds[1].clone()];
        let run = run_chase(&p, Strategy::Shortcut, Some(&sat), 6).unwrap();
        assert_eq!(node_facts(&p, &run, 0), vec!["R(a,b)", "U(a)", "U(b)"]);
        let child = node_facts(&p, &run, 1);
        assert!(child.contains(&"R(b,$0)".to_owned()));
        assert!(child.contains(&"U($0)".to_owned()));
        assert!(check_shortcut_discipline(&run, &p.tgds, &sat).is_ok());
        assert!(run_chase(&p, Strategy::Shortcut, None, 6).is_err());
    }

    #[test]
    fn one_pass_propagates_parentward() {
        let p = parse_program(
            "rel R/2\nrel S/2\nrel U/1 side\ntgd R(x,y) -> S(y,z)\ntgd S(x,y) -> U(x)\nfact R(a,b)",
        )
        .unwrap();
        let run = run_chase(&p, Strategy::OnePass, None, 20).unwrap();
        let kinds: Vec<&StepKind> = run.steps.iter().map(|s| &s.kind).collect();
        assert!(matches!(kinds[0], StepKind::Chase(ChaseApplication { child: Some(1), .. })));
        assert!(matches!(kinds[1], StepKind::Chase(ChaseApplication { child: None, node: 1, .. })));
        assert!(matches!(kinds[2], StepKind::Propagation { from: 1, to: 0, .. }));
        assert!(node_facts(&p, &run, 0).contains(&"U(b)".to_owned()));
        assert!(check_one_pass_discipline(&run).is_ok());
        let q = crate::logic::Cq::unnamed(vec![run.nodes[0].facts.iter().last().unwrap().clone()]);
        let m: Vec<Term> = vec![];
        assert!(check_proof(&p.tgds, &[], &run, &q, &m).is_ok());
    }

    #[test]
    fn one_pass_closes_a_node_before_descending() {
        let p = parse_program(EX9).unwrap();
        let (run, found) = run_chase_with_query(&p, Strategy::OnePass, None, 40, Some(&p.queries[0])).unwrap();
        assert!(found.is_some());
        assert!(matches!(&run.steps[0].kind, StepKind::Chase(ChaseApplication { child: None, .. })));
        assert!(check_one_pass_discipline(&run).is_ok());
    }

    #[test]
    fn principal_exempt_relaxes_full_principal_rules() {
        let p = parse_program("rel R/2\nrel P/2\nrel U/1 side\ntgd R(x,y), U(x) -> P(y,x)\nfact R(a,b)\nfact U(a)").unwrap();
        let run = run_chase(&p, Strategy::PrincipalExempt, None, 10).unwrap();
        let StepKind::RelaxedChase(app) = &run.steps[0].kind else { panic!("expected relaxed step") };
        assert_eq!(app.inherited.len(), 1);
        assert_eq!(node_facts(&p, &run, 1), vec!["P(b,a)", "U(a)"]);
    }
}
