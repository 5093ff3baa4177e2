use std::collections::HashSet;

use crate::logic::{apply, bind_atom, Atom, Cq, Instance, Term, Tgd};

use super::{guarded_by, guarded_in, ChaseApplication, ChaseRun, StepKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}: {reason}", match step { Some(i) => format!("step {i}"), None => "final match".to_owned() })]
pub struct ProofError {
    /// First illegal step, `None` when only the final match fails.
    pub step: Option<usize>,
    pub reason: String,
}

struct Replay {
    nodes: Vec<Instance>,
    parents: Vec<Option<usize>>,
    values: HashSet<Term>,
}

impl Replay {
    fn insert(&mut self, node: usize, f: Atom) {
        self.values.extend(f.args.iter().copied());
        self.nodes[node].insert(f);
    }
}

fn check_application(
    sigma: &[Tgd],
    closure: &[Tgd],
    r: &mut Replay,
    app: &ChaseApplication,
    relaxed: bool,
) -> Result<(), String> {
    let rule = app.rule.resolve(sigma, closure).ok_or("unknown rule")?;
    if app.node >= r.nodes.len() {
        return Err("unknown node".into());
    }
    if app.trigger.len() != rule.n_body_vars() {
        return Err("trigger has the wrong number of values".into());
    }
    let s: Vec<Option<Term>> = app.trigger.iter().copied().map(Some).collect();
    for b in &rule.body {
        if !r.nodes[app.node].contains(&apply(b, &s)) {
            return Err("trigger does not map the body into the node".into());
        }
    }
    if app.derived.len() != rule.head.len() {
        return Err("derived facts do not match the head".into());
    }
    let mut full_s = s.clone();
    full_s.resize(rule.n_vars(), None);
    let mut trail = Vec::new();
    for (h, d) in rule.head.iter().zip(&app.derived) {
        if !bind_atom(h, d, &mut full_s, &mut trail) {
            return Err("derived facts do not match the head".into());
        }
    }
    let mut fresh = HashSet::new();
    for v in rule.existentials() {
        let t = full_s[v as usize].ok_or("unbound existential")?;
        if !matches!(t, Term::Null(_)) || r.values.contains(&t) || !fresh.insert(t) {
            return Err("existential value is not a fresh null".into());
        }
    }
    match app.child {
        None => {
            if relaxed || !rule.is_full() {
                return Err("step must create a child node".into());
            }
            if !app.inherited.is_empty() {
                return Err("in-place step cannot inherit".into());
            }
            if app.derived.iter().all(|f| r.nodes[app.node].contains(f)) {
                return Err("derived fact already present in the node".into());
            }
            for f in &app.derived {
                r.insert(app.node, f.clone());
            }
        }
        Some(c) => {
            if relaxed && !rule.is_full() {
                return Err("relaxed step with a non-full rule".into());
            }
            if c != r.nodes.len() {
                return Err("child id is not the next node".into());
            }
            for f in &app.inherited {
                if !r.nodes[app.node].contains(f) {
                    return Err("inherited fact missing from the parent".into());
                }
                if !guarded_by(f, &app.derived) {
                    return Err("inherited fact not guarded by the new fact".into());
                }
            }
            r.nodes.push(Instance::new());
            r.parents.push(Some(app.node));
            for f in app.derived.iter().chain(&app.inherited) {
                r.insert(c, f.clone());
            }
        }
    }
    Ok(())
}

/// Replays `run` from its initial facts and checks every step, then checks
/// that `matching` maps `query` into the union of the replayed nodes.
/// `closure` resolves `RuleRef::Closure` references.
pub fn check_proof(
    sigma: &[Tgd],
    closure: &[Tgd],
    run: &ChaseRun,
    query: &Cq,
    matching: &[Term],
) -> Result<(), ProofError> {
    let mut r = Replay { nodes: vec![Instance::new()], parents: vec![None], values: HashSet::new() };
    for f in &run.initial {
        r.insert(0, f.clone());
    }
    for (i, step) in run.steps.iter().enumerate() {
        let res = match &step.kind {
            StepKind::Chase(app) => check_application(sigma, closure, &mut r, app, false),
            StepKind::RelaxedChase(app) => check_application(sigma, closure, &mut r, app, true),
            StepKind::Propagation { facts, from, to } => (|| {
                if *from >= r.nodes.len() || *to >= r.nodes.len() || from == to {
                    return Err("unknown or identical nodes".to_owned());
                }
                for f in facts {
                    if !r.nodes[*from].contains(f) {
                        return Err("propagated fact missing from the source".into());
                    }
                    if r.nodes[*to].contains(f) {
                        return Err("propagated fact already present at the target".into());
                    }
                    if !guarded_in(f, &r.nodes[*to]) {
                        return Err("propagated fact not guarded at the target".into());
                    }
                }
                for f in facts {
                    r.insert(*to, f.clone());
                }
                Ok(())
            })(),
        };
        res.map_err(|reason| ProofError { step: Some(i), reason })?;
    }
    if matching.len() < query.n_vars() {
        return Err(ProofError { step: None, reason: "match does not bind every query variable".into() });
    }
    let s: Vec<Option<Term>> = matching.iter().copied().map(Some).collect();
    for a in &query.atoms {
        let f = apply(a, &s);
        if !r.nodes.iter().any(|n| n.contains(&f)) {
            return Err(ProofError { step: None, reason: "query atom not matched in the final tree".into() });
        }
    }
    Ok(())
}

/// Once a propagation returns from a child to its parent, no later step may
/// touch the child's subtree. Returns the first offending step.
pub fn check_one_pass_discipline(run: &ChaseRun) -> Result<(), usize> {
    let mut abandoned: HashSet<usize> = HashSet::new();
    let mut parents: Vec<Option<usize>> = vec![None];
    let under_abandoned = |n: usize, parents: &[Option<usize>], ab: &HashSet<usize>| {
        let mut cur = Some(n);
        while let Some(c) = cur {
            if ab.contains(&c) {
                return true;
            }
            cur = parents[c];
        }
        false
    };
    for (i, step) in run.steps.iter().enumerate() {
        let touched: Vec<usize> = match &step.kind {
            StepKind::Chase(a) | StepKind::RelaxedChase(a) => {
                if let Some(c) = a.child {
                    if parents.len() <= c {
                        parents.resize(c + 1, None);
                    }
                    parents[c] = Some(a.node);
                }
                vec![a.node]
            }
            StepKind::Propagation { from, to, .. } => vec![*from, *to],
        };
        if touched.iter().any(|&n| n >= parents.len() || under_abandoned(n, &parents, &abandoned)) {
            return Err(i);
        }
        if let StepKind::Propagation { from, to, .. } = step.kind {
            if parents[from] != Some(to) {
                return Err(i);
            }
            abandoned.insert(from);
        }
    }
    Ok(())
}

/// No propagation; each node's in-place steps form one contiguous block, and
/// at the end every node is closed under the full rules used.
pub fn check_shortcut_discipline(run: &ChaseRun, sigma: &[Tgd], closure: &[Tgd]) -> Result<(), usize> {
    let mut finished: HashSet<usize> = HashSet::new();
    let mut current: Option<usize> = None;
    for (i, step) in run.steps.iter().enumerate() {
        match &step.kind {
            StepKind::Propagation { .. } | StepKind::RelaxedChase(_) => return Err(i),
            StepKind::Chase(a) if a.child.is_none() => {
                if current != Some(a.node) {
                    if finished.contains(&a.node) {
                        return Err(i);
                    }
                    if let Some(c) = current {
                        finished.insert(c);
                    }
                    current = Some(a.node);
                }
            }
            StepKind::Chase(a) => {
                // A non-full step ends the saturation phase of its node.
                if current == Some(a.node) {
                    current = None;
                }
                finished.insert(a.node);
            }
        }
    }
    if run.exhausted {
        return Ok(());
    }
    let full: Vec<&Tgd> = sigma.iter().filter(|r| r.is_full()).chain(closure).collect();
    for n in &run.nodes {
        for r in &full {
            for m in crate::logic::find_homomorphisms(&r.body, &n.facts, &[]) {
                if r.head.iter().any(|h| !n.facts.contains(&apply(h, &m))) {
                    return Err(run.steps.len());
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chase::{bounded_entailment_oracle, OracleVerdict};
    use crate::dsl::parse_program;

    #[test]
    fn perturbed_trigger_is_rejected() {
        let p = parse_program(
            "rel R/2\nrel U/1 side\ntgd R(x,y) -> R(y,z)\ntgd R(x,y), U(x) -> U(y)\nfact R(a,b)\nfact U(a)\nquery R(x,y), R(y,z), U(z)",
        )
        .unwrap();
        let OracleVerdict::Entailed { matching, mut run } = bounded_entailment_oracle(&p, &p.queries[0], 50) else {
            panic!()
        };
        assert!(check_proof(&p.tgds, &[], &run, &p.queries[0], &matching).is_ok());
        let idx = run
            .steps
            .iter()
            .position(|s| matches!(&s.kind, StepKind::Chase(a) if !a.trigger.is_empty()))
            .unwrap();
        if let StepKind::Chase(a) = &mut run.steps[idx].kind {
            a.trigger[0] = Term::Const(crate::logic::Sym::new("zzz"));
        }
        assert_eq!(check_proof(&p.tgds, &[], &run, &p.queries[0], &matching).unwrap_err().step, Some(idx));
    }

    #[test]
    fn wrong_match_is_rejected() {
        let p = parse_program("rel R/2\nfact R(a,b)\nquery R(x,y)").unwrap();
        let OracleVerdict::Entailed { run, .. } = bounded_entailment_oracle(&p, &p.queries[0], 5) else { panic!() };
        let bad = vec![Term::Const(crate::logic::Sym::new("b")), Term::Const(crate::logic::Sym::new("a"))];
        assert_eq!(check_proof(&p.tgds, &[], &run, &p.queries[0], &bad).unwrap_err().step, None);
    }
}
