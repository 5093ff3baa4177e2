//! Query answering under linear TGDs of bounded semi-width: UCQ rewriting,
//! with a bounded tight-chase search as a second route.

mod posgraph;
mod rewrite;
mod tight;

pub use posgraph::{decomposition_from_split, semi_width, NotDecomposable, Position, PositionGraph, SemiWidthDecomposition};
pub use rewrite::{proof_from_rewriting, rewrite_and_evaluate, ucq_rewrite, CapExceeded, Rep, RewriteOutcome, RewriteStep, UnionOfCqs};
pub use tight::{tight_chase_search, TightOutcome, TightStats};

use serde::Serialize;

use crate::logic::{apply, bind_atom, Atom, Cq, Instance, Term, Tgd};

/// One linear chase step: `rule` fired on its body under `trigger`, producing `fact`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinStep {
    pub rule: usize,
    pub trigger: Vec<Term>,
    pub fact: Atom,
}

/// A linear chase sequence from the instance and a match of the query in the result.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearProof {
    pub steps: Vec<LinStep>,
    pub matching: Vec<Term>,
}

pub(crate) fn first_free_null(instance: &Instance) -> u32 {
    instance
        .iter()
        .flat_map(|a| a.args.iter())
        .filter_map(|t| if let Term::Null(n) = t { Some(n + 1) } else { None })
        .max()
        .unwrap_or(0)
}

/// Replays `proof`; returns the first bad step (or `steps.len()` for a bad match).
pub fn check_linear_proof(rules: &[Tgd], instance: &Instance, proof: &LinearProof, q: &Cq) -> Result<(), usize> {
    let mut facts = instance.clone();
    for (i, st) in proof.steps.iter().enumerate() {
        let r = rules.get(st.rule).ok_or(i)?;
        if st.trigger.len() != r.n_body_vars() {
            return Err(i);
        }
        let s: Vec<Option<Term>> = st.trigger.iter().copied().map(Some).collect();
        if !facts.contains(&apply(&r.body[0], &s)) {
            return Err(i);
        }
        let mut full = s;
        full.resize(r.n_vars(), None);
        if !bind_atom(&r.head[0], &st.fact, &mut full, &mut Vec::new()) {
            return Err(i);
        }
        for e in r.existentials() {
            match full[e as usize] {
                Some(t @ Term::Null(_)) if !facts.iter().any(|f| f.args.contains(&t)) => {}
                _ => return Err(i),
            }
        }
        facts.insert(st.fact.clone());
    }
    let s: Vec<Option<Term>> = proof.matching.iter().copied().map(Some).collect();
    if proof.matching.len() < q.n_vars() || !q.atoms.iter().all(|a| facts.contains(&apply(a, &s))) {
        return Err(proof.steps.len());
    }
    Ok(())
}

/// Depth below which tight matches of a `k`-atom query live. With `sigma2`
/// set, the semi-width variant. `None` on overflow.
pub fn depth_bound(k: usize, sigma: usize, sigma2: Option<usize>, m: usize, w: usize) -> Option<u64> {
    let base = (m as u64).checked_add(w as u64)?.checked_pow(w as u32)?;
    let s = sigma as u64;
    let factor = match sigma2 {
        None => s,
        Some(s2) => s.checked_mul(s)?.max((s2 as u64).checked_mul(s)?),
    };
    (k as u64).checked_mul(factor)?.checked_mul(base)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EngineMode {
    #[default]
    Rewrite,
    TightChase,
    Both,
}

impl EngineMode {
    pub fn parse(s: &str) -> Option<EngineMode> {
        match s {
            "rewrite" => Some(EngineMode::Rewrite),
            "chase" | "tight-chase" | "tight" => Some(EngineMode::TightChase),
            "both" => Some(EngineMode::Both),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinearBudgets {
    pub rewrite_cap: usize,
    pub chase_nodes: usize,
    /// Extra cap on the chase depth besides the theoretical bound.
    pub chase_depth: Option<usize>,
}

impl Default for LinearBudgets {
    fn default() -> Self {
        LinearBudgets { rewrite_cap: 100_000, chase_nodes: 100_000, chase_depth: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LinearStats {
    pub disjuncts: usize,
    pub rewrite_complete: Option<bool>,
    pub chase_expanded: usize,
    pub chase_max_depth: usize,
    pub chase_complete: Option<bool>,
    pub depth_bound: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct LinearDecision {
    pub value: bool,
    pub proof: Option<LinearProof>,
    pub stats: LinearStats,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LinearError {
    #[error("rewriting says {rewrite}, tight chase says {tight}")]
    ModeDisagreement { rewrite: bool, tight: bool },
    #[error("neither route finished within its budget")]
    Undecided,
}

/// Decides whether `instance` and the linear `rules` entail `q`.
pub fn decide_linear(
    q: &Cq,
    rules: &[Tgd],
    instance: &Instance,
    decomposition: &SemiWidthDecomposition,
    mode: EngineMode,
    budgets: LinearBudgets,
) -> Result<LinearDecision, LinearError> {
    let mut stats = LinearStats::default();
    let mut rewrite_verdict = None;
    let mut proof = None;
    if mode != EngineMode::TightChase {
        let o = rewrite_and_evaluate(q, rules, instance, budgets.rewrite_cap);
        stats.disjuncts = o.ucq.len();
        stats.rewrite_complete = Some(o.complete);
        if let Some((i, m)) = o.matched {
            proof = Some(proof_from_rewriting(&o.ucq, rules, instance, i, m));
            rewrite_verdict = Some(true);
        } else if o.complete {
            rewrite_verdict = Some(false);
        }
    }
    let run_tight = mode != EngineMode::Rewrite || rewrite_verdict.is_none();
    let mut tight_verdict = None;
    if run_tight {
        let m = rules.iter().flat_map(|r| r.body.iter().chain(&r.head)).map(|a| a.args.len()).max().unwrap_or(0);
        let s2 = (!decomposition.sigma2.is_empty()).then_some(decomposition.sigma2.len());
        let bound = depth_bound(q.atoms.len(), rules.len(), s2, m, decomposition.w);
        stats.depth_bound = bound;
        let cap = bound.map_or(usize::MAX, |b| b.min(usize::MAX as u64) as usize);
        let cap = budgets.chase_depth.map_or(cap, |d| d.min(cap));
        let o = tight_chase_search(q, rules, instance, cap, budgets.chase_nodes, true);
        stats.chase_expanded = o.stats.expanded;
        stats.chase_max_depth = o.stats.max_depth;
        stats.chase_complete = Some(o.complete);
        if o.proof.is_some() {
            tight_verdict = Some(true);
            if proof.is_none() {
                proof = o.proof;
            }
        } else if o.complete {
            tight_verdict = Some(false);
        }
    }
    if let (Some(a), Some(b)) = (rewrite_verdict, tight_verdict) {
        if a != b {
            return Err(LinearError::ModeDisagreement { rewrite: a, tight: b });
        }
    }
    match rewrite_verdict.or(tight_verdict) {
        Some(value) => Ok(LinearDecision { value, proof, stats }),
        None => Err(LinearError::Undecided),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;

    #[test]
    fn depth_bounds() {
        assert_eq!(depth_bound(3, 10, None, 3, 2), Some(750));
        assert_eq!(depth_bound(1, 1, None, 2, 1), Some(3));
        assert_eq!(depth_bound(2, 4, Some(3), 2, 1), Some(96));
        assert_eq!(depth_bound(2, 4, Some(5), 2, 1), Some(2 * 20 * 3));
        assert_eq!(depth_bound(usize::MAX, usize::MAX, None, 3, 2), None);
    }

    #[test]
    fn modes_agree_on_small_programs() {
        for (text, want) in [
            ("rel R/2\nrel S/1\ntgd R(x,y) -> R(y,z)\nfact R(a,b)\nquery S(x)", false),
            ("rel R/2\ntgd R(x,y) -> R(y,z)\nfact R(a,b)\nquery R(x,y), R(y,z)", true),
            ("rel R/2\nrel S/1\nfact R(a,b)\nquery R(x,y)", true),
        ] {
            let p = parse_program(text).unwrap();
            let d = semi_width(&p.tgds, 2).unwrap();
            let r = decide_linear(&p.queries[0], &p.tgds, &p.instance, &d, EngineMode::Both, LinearBudgets::default()).unwrap();
            assert_eq!(r.value, want, "{text}");
            if let Some(pr) = &r.proof {
                check_linear_proof(&p.tgds, &p.instance, pr, &p.queries[0]).unwrap();
            }
        }
    }
}
