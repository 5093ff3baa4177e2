use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::logic::{first_hom, total, Atom, Cq, Instance, Term, Tgd};

use super::{LinStep, LinearProof};

/// What a parent variable (or a rule body variable) became in a rewritten disjunct.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rep {
    Var(u32),
    Const(Term),
    /// Unified with this existential variable of the rule.
    Exist(u32),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteStep {
    pub parent: usize,
    pub rule: usize,
    pub parent_map: Vec<Rep>,
    pub body_map: Vec<Rep>,
}

#[derive(Clone, Debug, Default)]
pub struct UnionOfCqs {
    pub disjuncts: Vec<Cq>,
    /// `None` for the input query.
    pub origins: Vec<Option<RewriteStep>>,
}

impl UnionOfCqs {
    pub fn len(&self) -> usize {
        self.disjuncts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.disjuncts.is_empty()
    }
}

#[derive(Clone, Debug, thiserror::Error)]
#[error("rewriting exceeded {cap} disjuncts")]
pub struct CapExceeded {
    pub cap: usize,
    pub partial: UnionOfCqs,
}

/// Dedup key: atoms sorted with variables blanked, duplicates dropped, then
/// variables renamed by first occurrence. Returns the renaming too.
fn canonical(atoms: Vec<Atom>) -> (Vec<Atom>, HashMap<u32, u32>) {
    let blank = |a: &Atom| (a.rel, a.args.iter().map(|t| if t.is_var() { None } else { Some(*t) }).collect::<Vec<_>>());
    let mut atoms = atoms;
    atoms.sort_by_key(blank);
    let mut map: HashMap<u32, u32> = HashMap::new();
    let mut out: Vec<Atom> = Vec::new();
    for a in atoms {
        let r = a.map_terms(|t| match t {
            Term::Var(v) => {
                let n = map.len() as u32;
                Term::Var(*map.entry(v).or_insert(n))
            }
            o => o,
        });
        if !out.contains(&r) {
            out.push(r);
        }
    }
    (out, map)
}

struct Uf(Vec<usize>);

impl Uf {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = x;
        while self.0[c] != r {
            let n = self.0[c];
            self.0[c] = r;
            c = n;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// All one-step piece rewritings of `d` with `rule`.
fn rewrite_once(d: &Cq, rule: &Tgd) -> Vec<(Cq, Vec<Rep>, Vec<Rep>)> {
    let head = &rule.head[0];
    let body = &rule.body[0];
    let cands: Vec<usize> = (0..d.atoms.len()).filter(|&i| d.atoms[i].rel == head.rel).collect();
    if cands.is_empty() {
        return vec![];
    }
    let nq = d.n_vars();
    let nr = rule.n_vars();
    let nb = rule.n_body_vars();
    let mut consts: Vec<Term> = Vec::new();
    for a in d.atoms.iter().chain([head, body]) {
        for t in &a.args {
            if matches!(t, Term::Const(_)) && !consts.contains(t) {
                consts.push(*t);
            }
        }
    }
    let qid = |t: &Term, consts: &[Term]| match t {
        Term::Var(v) => *v as usize,
        c => nq + nr + consts.iter().position(|x| x == c).unwrap(),
    };
    let rid = |t: &Term, consts: &[Term]| match t {
        Term::Var(v) => nq + *v as usize,
        c => nq + nr + consts.iter().position(|x| x == c).unwrap(),
    };
    let total_ids = nq + nr + consts.len();
    let mut out = Vec::new();
    for mask in 1u64..(1u64 << cands.len()) {
        let piece: Vec<usize> = (0..cands.len()).filter(|b| mask >> b & 1 == 1).map(|b| cands[b]).collect();
        let mut uf = Uf((0..total_ids).collect());
        for &i in &piece {
            for (qt, ht) in d.atoms[i].args.iter().zip(&head.args) {
                uf.union(qid(qt, &consts), rid(ht, &consts));
            }
        }
        // Classes: constants, rule variables, query variables.
        let mut cls_const: HashMap<usize, Term> = HashMap::new();
        let mut ok = true;
        for (k, c) in consts.iter().enumerate() {
            let r = uf.find(nq + nr + k);
            if cls_const.insert(r, *c).is_some_and(|o| o != *c) {
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        let mut rule_vars_of: HashMap<usize, Vec<usize>> = HashMap::new();
        for u in 0..nr {
            rule_vars_of.entry(uf.find(nq + u)).or_default().push(u);
        }
        let rest_vars: HashSet<u32> =
            (0..d.atoms.len()).filter(|i| !piece.contains(i)).flat_map(|i| d.atoms[i].vars()).collect();
        for e in nb..nr {
            let r = uf.find(nq + e);
            if cls_const.contains_key(&r) || rule_vars_of[&r].len() > 1 {
                ok = false;
                break;
            }
            if (0..nq as u32).any(|v| uf.find(v as usize) == r && rest_vars.contains(&v)) {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let rep = |id: usize, uf: &mut Uf| -> Rep {
            let r = uf.find(id);
            if let Some(c) = cls_const.get(&r) {
                return Rep::Const(*c);
            }
            if let Some(e) = rule_vars_of.get(&r).and_then(|vs| vs.iter().find(|&&u| u >= nb)) {
                return Rep::Exist(*e as u32);
            }
            Rep::Var(r as u32)
        };
        let to_term = |r: Rep| match r {
            Rep::Var(v) => Term::Var(v),
            Rep::Const(c) => c,
            Rep::Exist(_) => unreachable!("existentials only occur in the piece"),
        };
        let mut atoms: Vec<Atom> = Vec::new();
        for (i, a) in d.atoms.iter().enumerate() {
            if !piece.contains(&i) {
                atoms.push(a.map_terms(|t| to_term(rep(qid(&t, &consts), &mut uf))));
            }
        }
        atoms.push(body.map_terms(|t| to_term(rep(rid(&t, &consts), &mut uf))));
        let (atoms, map) = canonical(atoms);
        let remap = |r: Rep| match r {
            Rep::Var(v) => Rep::Var(map[&v]),
            o => o,
        };
        let parent_map: Vec<Rep> = (0..nq).map(|v| remap(rep(v, &mut uf))).collect();
        let body_map: Vec<Rep> = (0..nb).map(|u| remap(rep(nq + u, &mut uf))).collect();
        out.push((Cq::unnamed(atoms), parent_map, body_map));
    }
    out
}

/// Outcome of rewriting interleaved with evaluation.
#[derive(Clone, Debug)]
pub struct RewriteOutcome {
    pub ucq: UnionOfCqs,
    /// Matched disjunct and its match.
    pub matched: Option<(usize, Vec<Term>)>,
    /// The rewriting reached its fixpoint (or a match) without hitting the cap.
    pub complete: bool,
}

fn generate(
    q: &Cq,
    rules: &[Tgd],
    cap: usize,
    mut stop: impl FnMut(&UnionOfCqs, std::ops::Range<usize>) -> bool,
) -> (UnionOfCqs, bool) {
    let (atoms, _) = canonical(q.atoms.clone());
    let root = Cq::unnamed(atoms);
    // The input query keeps its own variables so that matches transfer back.
    let mut u = UnionOfCqs { disjuncts: vec![q.clone()], origins: vec![None] };
    let mut seen: HashSet<Vec<Atom>> = HashSet::from([root.atoms]);
    if stop(&u, 0..1) {
        return (u, true);
    }
    let mut frontier = 0..1;
    while !frontier.is_empty() {
        let start = u.len();
        for di in frontier.clone() {
            for (ri, r) in rules.iter().enumerate() {
                for (c, parent_map, body_map) in rewrite_once(&u.disjuncts[di], r) {
                    if seen.insert(c.atoms.clone()) {
                        if u.len() >= cap {
                            return (u, false);
                        }
                        u.disjuncts.push(c);
                        u.origins.push(Some(RewriteStep { parent: di, rule: ri, parent_map, body_map }));
                    }
                }
            }
        }
        frontier = start..u.len();
        if stop(&u, frontier.clone()) {
            return (u, true);
        }
    }
    (u, true)
}

/// Piece-unification rewriting of `q` to its fixpoint, up to `cap` disjuncts.
pub fn ucq_rewrite(q: &Cq, rules: &[Tgd], cap: usize) -> Result<UnionOfCqs, CapExceeded> {
    match generate(q, rules, cap, |_, _| false) {
        (u, true) => Ok(u),
        (partial, false) => Err(CapExceeded { cap, partial }),
    }
}

/// Rewrites level by level, evaluating each new level in parallel and stopping at the first match.
pub fn rewrite_and_evaluate(q: &Cq, rules: &[Tgd], instance: &Instance, cap: usize) -> RewriteOutcome {
    let mut matched = None;
    let (ucq, complete) = generate(q, rules, cap, |u, range| {
        matched = range
            .into_par_iter()
            .find_map_first(|i| first_hom(&u.disjuncts[i].atoms, instance, &[]).map(|s| (i, total(&s))));
        matched.is_some()
    });
    let complete = complete || matched.is_some();
    RewriteOutcome { ucq, matched, complete }
}

/// Replays the rewriting chain of disjunct `idx` forwards from its match.
pub fn proof_from_rewriting(
    ucq: &UnionOfCqs,
    rules: &[Tgd],
    instance: &Instance,
    idx: usize,
    matching: Vec<Term>,
) -> LinearProof {
    let mut next_null = super::first_free_null(instance);
    let mut steps = Vec::new();
    let mut g = matching;
    let mut cur = idx;
    while let Some(step) = &ucq.origins[cur] {
        let rule = &rules[step.rule];
        let eval = |r: &Rep, g: &[Term], nulls: &[Term]| match *r {
            Rep::Var(v) => g[v as usize],
            Rep::Const(c) => c,
            Rep::Exist(e) => nulls[e as usize - rule.n_body_vars()],
        };
        let nulls: Vec<Term> = rule
            .existentials()
            .iter()
            .map(|_| {
                next_null += 1;
                Term::Null(next_null - 1)
            })
            .collect();
        let trigger: Vec<Term> = step.body_map.iter().map(|r| eval(r, &g, &nulls)).collect();
        let mut s: Vec<Option<Term>> = trigger.iter().copied().map(Some).collect();
        s.extend(nulls.iter().copied().map(Some));
        let fact = crate::logic::apply(&rule.head[0], &s);
        steps.push(LinStep { rule: step.rule, trigger, fact });
        g = step.parent_map.iter().map(|r| eval(r, &g, &nulls)).collect();
        cur = step.parent;
    }
    LinearProof { steps, matching: g }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;
    use crate::linear::check_linear_proof;

    #[test]
    fn one_resolution_step() {
        let p = parse_program("rel A/2\nrel U/1\ntgd A(x,y) -> U(x)\nquery U(x)").unwrap();
        let u = ucq_rewrite(&p.queries[0], &p.tgds, 100).unwrap();
        assert_eq!(u.len(), 2);
        assert_eq!(u.disjuncts[1].atoms, vec![Atom::new(p.sig.lookup("A").unwrap(), vec![Term::Var(0), Term::Var(1)])]);
    }

    #[test]
    fn no_unifiable_atom_keeps_query() {
        let p = parse_program("rel A/2\nrel U/1\ntgd A(x,y) -> A(y,x)\nquery U(x)").unwrap();
        assert_eq!(ucq_rewrite(&p.queries[0], &p.tgds, 100).unwrap().len(), 1);
    }

    #[test]
    fn existential_position_blocked_when_shared() {
        let p = parse_program("rel R/2\nrel S/1\ntgd S(x) -> R(x,z)\nquery R(x,y), S(y)").unwrap();
        assert_eq!(ucq_rewrite(&p.queries[0], &p.tgds, 100).unwrap().len(), 1);
        let p = parse_program("rel R/2\nrel S/1\ntgd S(x) -> R(x,z)\nquery R(x,y), S(x)").unwrap();
        let u = ucq_rewrite(&p.queries[0], &p.tgds, 100).unwrap();
        assert_eq!(u.len(), 2);
        assert_eq!(u.disjuncts[1].atoms.len(), 1);
    }

    #[test]
    fn pieces_merge_atoms() {
        // Both atoms share the existential: only the two-atom piece rewrites.
        let p = parse_program("rel R/2\nrel A/1\ntgd A(x) -> R(x,z)\nquery R(x,y), R(w,y)").unwrap();
        let u = ucq_rewrite(&p.queries[0], &p.tgds, 100).unwrap();
        assert!(u.disjuncts.iter().any(|d| d.atoms.len() == 1 && d.atoms[0].rel == p.sig.lookup("A").unwrap()));
    }

    #[test]
    fn cap_is_reported() {
        let p = parse_program("rel A/1\nrel B/1\nrel C/1\ntgd A(x) -> B(x)\ntgd C(x) -> A(x)\nquery B(x)").unwrap();
        let e = ucq_rewrite(&p.queries[0], &p.tgds, 2).unwrap_err();
        assert_eq!(e.partial.len(), 2);
        assert_eq!(ucq_rewrite(&p.queries[0], &p.tgds, 3).unwrap().len(), 3);
    }

    #[test]
    fn forward_replay_is_a_valid_chase() {
        let p = parse_program(
            "rel R/2\nrel A/1\nrel B/2\ntgd A(x) -> R(x,z)\ntgd B(x,y) -> A(y)\nfact B(c,d)\nquery R(x,y), R(w,y)",
        )
        .unwrap();
        let o = rewrite_and_evaluate(&p.queries[0], &p.tgds, &p.instance, 100);
        let (i, m) = o.matched.unwrap();
        let proof = proof_from_rewriting(&o.ucq, &p.tgds, &p.instance, i, m);
        assert_eq!(proof.steps.len(), 2);
        check_linear_proof(&p.tgds, &p.instance, &proof, &p.queries[0]).unwrap();
    }
}
