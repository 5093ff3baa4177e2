//! Deterministic search of the linear chase forest with tightness pruning.
//!
//! In a tight match, the path between an image node and its closest image
//! ancestor `a` never repeats a (rule, configuration relative to `a`) pair,
//! and the image closed under common ancestors has at most `2k` nodes per
//! tree. A node is kept only if it can be reached from its root through at
//! most `2k` repeat-free segments, and never below the depth bound.

use std::collections::{HashMap, VecDeque};

use crate::logic::{apply, bind_atom, first_hom, first_hom_through, total, Atom, Cq, Instance, Term, Tgd};

use super::{LinStep, LinearProof};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Cfg {
    Pos(usize),
    Const(Term),
    Fresh(usize),
}

fn config(anchor: &Atom, f: &Atom) -> Vec<Cfg> {
    let mut fresh: Vec<Term> = Vec::new();
    f.args
        .iter()
        .map(|t| {
            if let Term::Const(_) = t {
                Cfg::Const(*t)
            } else if let Some(p) = anchor.args.iter().position(|a| a == t) {
                Cfg::Pos(p)
            } else {
                let i = fresh.iter().position(|x| x == t).unwrap_or_else(|| {
                    fresh.push(*t);
                    fresh.len() - 1
                });
                Cfg::Fresh(i)
            }
        })
        .collect()
}

struct Node {
    fact: Atom,
    parent: Option<usize>,
    rule: Option<usize>,
    trigger: Vec<Term>,
    depth: usize,
    hops: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TightStats {
    pub expanded: usize,
    pub max_depth: usize,
    pub pruned: usize,
}

#[derive(Clone, Debug)]
pub struct TightOutcome {
    pub proof: Option<LinearProof>,
    /// The pruned forest was explored entirely within the node budget.
    pub complete: bool,
    pub stats: TightStats,
}

/// Searches for a match of `q` in the linear chase of `instance` under `rules`.
/// `hop_pruning` can be switched off to compare against the plain depth-capped search.
pub fn tight_chase_search(
    q: &Cq,
    rules: &[Tgd],
    instance: &Instance,
    depth_cap: usize,
    node_budget: usize,
    hop_pruning: bool,
) -> TightOutcome {
    let mut stats = TightStats::default();
    let mut union = instance.clone();
    if let Some(s) = first_hom(&q.atoms, &union, &[]) {
        return TightOutcome { proof: Some(LinearProof { steps: vec![], matching: total(&s) }), complete: true, stats };
    }
    let max_hops = 2 * q.atoms.len().max(1);
    let mut next_null = super::first_free_null(instance);
    let mut nodes: Vec<Node> = Vec::new();
    let mut node_of: HashMap<Atom, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    for f in instance.iter() {
        node_of.insert(f.clone(), nodes.len());
        queue.push_back(nodes.len());
        nodes.push(Node { fact: f.clone(), parent: None, rule: None, trigger: vec![], depth: 0, hops: 0 });
    }
    while let Some(n) = queue.pop_front() {
        for (ri, r) in rules.iter().enumerate() {
            let mut s = vec![None; r.n_vars()];
            if !bind_atom(&r.body[0], &nodes[n].fact, &mut s, &mut Vec::new()) {
                continue;
            }
            let trigger: Vec<Term> = s[..r.n_body_vars()].iter().map(|t| t.unwrap()).collect();
            for e in r.existentials() {
                s[e as usize] = Some(Term::Null(next_null));
                next_null += 1;
            }
            let fact = apply(&r.head[0], &s);
            if union.contains(&fact) {
                continue;
            }
            let depth = nodes[n].depth + 1;
            if depth > depth_cap {
                stats.pruned += 1;
                continue;
            }
            let hops = if hop_pruning { hops_of(&nodes, n, ri, &fact) } else { 0 };
            if hops > max_hops {
                stats.pruned += 1;
                continue;
            }
            if nodes.len() - instance.len() >= node_budget {
                return TightOutcome { proof: None, complete: false, stats };
            }
            stats.expanded += 1;
            stats.max_depth = stats.max_depth.max(depth);
            let id = nodes.len();
            nodes.push(Node { fact: fact.clone(), parent: Some(n), rule: Some(ri), trigger, depth, hops });
            node_of.insert(fact.clone(), id);
            union.insert(fact.clone());
            queue.push_back(id);
            if let Some(m) = first_hom_through(&q.atoms, &union, &fact) {
                let matching = total(&m);
                let proof = extract(&nodes, &node_of, q, &matching);
                return TightOutcome { proof: Some(proof), complete: true, stats };
            }
        }
    }
    TightOutcome { proof: None, complete: true, stats }
}

/// Fewest repeat-free segments from the root to a new child of `parent`.
fn hops_of(nodes: &[Node], parent: usize, rule: usize, fact: &Atom) -> usize {
    // Path from the root down to the new node; `None` stands for the new node.
    let mut path: Vec<usize> = Vec::new();
    let mut cur = Some(parent);
    while let Some(c) = cur {
        path.push(c);
        cur = nodes[c].parent;
    }
    path.reverse();
    let entry = |i: usize| -> (Option<usize>, &Atom) {
        if i == path.len() {
            (Some(rule), fact)
        } else {
            (nodes[path[i]].rule, &nodes[path[i]].fact)
        }
    };
    let mut best = usize::MAX;
    for ai in (0..path.len()).rev() {
        let anchor = &nodes[path[ai]].fact;
        let mut seen = std::collections::HashSet::new();
        let mut free = true;
        for i in ai + 1..=path.len() {
            let (r, f) = entry(i);
            if !seen.insert((r, config(anchor, f))) {
                free = false;
                break;
            }
        }
        if free {
            best = best.min(nodes[path[ai]].hops + 1);
        }
    }
    best
}

fn extract(nodes: &[Node], node_of: &HashMap<Atom, usize>, q: &Cq, matching: &[Term]) -> LinearProof {
    let s: Vec<Option<Term>> = matching.iter().copied().map(Some).collect();
    let mut need: Vec<usize> = Vec::new();
    for a in &q.atoms {
        let mut cur = Some(node_of[&apply(a, &s)]);
        while let Some(c) = cur {
            if need.contains(&c) {
                break;
            }
            need.push(c);
            cur = nodes[c].parent;
        }
    }
    need.sort();
    let steps = need
        .into_iter()
        .filter_map(|i| {
            let n = &nodes[i];
            n.rule.map(|rule| LinStep { rule, trigger: n.trigger.clone(), fact: n.fact.clone() })
        })
        .collect();
    LinearProof { steps, matching: matching.to_vec() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;
    use crate::linear::check_linear_proof;

    #[test]
    fn chain_is_found_and_pruned_search_terminates() {
        let p = parse_program("rel R/2\ntgd R(x,y) -> R(y,z)\nfact R(a,b)\nquery R(x,y), R(y,z), R(z,w)").unwrap();
        let o = tight_chase_search(&p.queries[0], &p.tgds, &p.instance, 1000, 10_000, true);
        let proof = o.proof.unwrap();
        check_linear_proof(&p.tgds, &p.instance, &proof, &p.queries[0]).unwrap();
        let p = parse_program("rel R/2\nrel S/1\ntgd R(x,y) -> R(y,z)\nfact R(a,b)\nquery S(x)").unwrap();
        let o = tight_chase_search(&p.queries[0], &p.tgds, &p.instance, 1000, 10_000, true);
        assert!(o.proof.is_none() && o.complete);
        assert!(o.stats.max_depth <= 2 * 2 + 1);
    }

    #[test]
    fn already_matched_needs_no_work() {
        let p = parse_program("rel R/2\ntgd R(x,y) -> R(y,z)\nfact R(a,b)\nquery R(x,y)").unwrap();
        let o = tight_chase_search(&p.queries[0], &p.tgds, &p.instance, 10, 10, true);
        assert_eq!(o.stats.expanded, 0);
        assert!(o.proof.unwrap().steps.is_empty());
    }

    #[test]
    fn budget_makes_it_incomplete() {
        let p = parse_program("rel R/2\nrel S/1\ntgd R(x,y) -> R(y,z)\ntgd R(x,y) -> R(x,z)\nfact R(a,b)\nquery S(x)").unwrap();
        let o = tight_chase_search(&p.queries[0], &p.tgds, &p.instance, 1000, 3, false);
        assert!(!o.complete);
    }
}
