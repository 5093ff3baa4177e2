//! Random programs within scale bounds and the differential test against the
//! bounded chase oracle.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chase::{bounded_entailment_oracle, check_proof, OracleVerdict};
use crate::dsl::{parse_program, render_program, Program};
use crate::linear::LinearError;
use crate::pipeline::{LinearOrCert, PipelineConfig, Prepared, ScaleParams};

/// Environment variable holding the worker count for parallel runs.
pub const WORKERS_ENV: &str = "GTGD_WORKERS";

/// Runs `f` on a pool sized by [`WORKERS_ENV`] when set, else on the global pool.
pub fn with_workers<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool").install(f),
        _ => f(),
    }
}

pub fn case_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

struct Rel {
    name: String,
    arity: usize,
    side: bool,
}

/// A random guarded program obeying its side signature, with one to two queries.
pub fn generate_program(rng: &mut ChaCha8Rng, scale: &ScaleParams) -> Program {
    let n_rel = rng.gen_range(1..=scale.max_relations.max(1));
    let mut rels: Vec<Rel> = Vec::new();
    for i in 0..n_rel {
        let side = i > 0 && scale.max_side_arity > 0 && rng.gen_bool(0.35);
        let arity = if side { rng.gen_range(1..=scale.max_side_arity) } else { rng.gen_range(1..=scale.max_arity.max(1)) };
        let name = if side { format!("S{i}") } else { format!("R{i}") };
        rels.push(Rel { name, arity, side });
    }
    let principal: Vec<usize> = (0..n_rel).filter(|&i| !rels[i].side).collect();
    let sides: Vec<usize> = (0..n_rel).filter(|&i| rels[i].side).collect();
    let consts = ["a", "b", "c", "d"];
    let mut text = String::new();
    for r in &rels {
        let _ = writeln!(text, "rel {}/{}{}", r.name, r.arity, if r.side { " side" } else { "" });
    }
    let atom = |name: &str, args: &[String]| format!("{name}({})", args.join(","));
    for _ in 0..rng.gen_range(0..=scale.max_rules) {
        let side_guard = !sides.is_empty() && rng.gen_bool(0.1);
        let g = if side_guard { *sides.choose(rng).unwrap() } else { *principal.choose(rng).unwrap() };
        let mut gargs: Vec<String> = Vec::new();
        for j in 0..rels[g].arity {
            if j > 0 && rng.gen_bool(0.15) {
                let k = rng.gen_range(0..j);
                gargs.push(gargs[k].clone());
            } else if rng.gen_bool(0.04) {
                gargs.push(format!("'{}", consts.choose(rng).unwrap()));
            } else {
                gargs.push(format!("x{j}"));
            }
        }
        let mut vars: Vec<String> = gargs.iter().filter(|a| !a.starts_with('\'')).cloned().collect();
        vars.dedup();
        vars.sort();
        vars.dedup();
        let mut body = vec![atom(&rels[g].name, &gargs)];
        if !vars.is_empty() && !sides.is_empty() {
            for _ in 0..rng.gen_range(0..=2) {
                let s = *sides.choose(rng).unwrap();
                let args: Vec<String> = (0..rels[s].arity).map(|_| vars.choose(rng).unwrap().clone()).collect();
                body.push(atom(&rels[s].name, &args));
            }
        }
        let mut frontier: Vec<String> = vars.clone();
        frontier.shuffle(rng);
        frontier.truncate(rng.gen_range(0..=scale.max_width.min(frontier.len())));
        let n_heads = if rng.gen_bool(0.1) { 2 } else { 1 };
        let mut heads = Vec::new();
        for _ in 0..n_heads {
            let h = rng.gen_range(0..n_rel);
            let args: Vec<String> = (0..rels[h].arity)
                .map(|_| {
                    if !frontier.is_empty() && (rels[h].side || rng.gen_bool(0.6)) {
                        frontier.choose(rng).unwrap().clone()
                    } else {
                        format!("z{}", rng.gen_range(0..2))
                    }
                })
                .collect();
            heads.push(atom(&rels[h].name, &args));
        }
        let _ = writeln!(text, "tgd {} -> {}", body.join(", "), heads.join(", "));
    }
    for _ in 0..rng.gen_range(0..=scale.max_facts) {
        let r = &rels[rng.gen_range(0..n_rel)];
        let args: Vec<String> = (0..r.arity).map(|_| consts.choose(rng).unwrap().to_string()).collect();
        let _ = writeln!(text, "fact {}", atom(&r.name, &args));
    }
    for _ in 0..rng.gen_range(1..=2) {
        let n = rng.gen_range(1..=scale.max_query_atoms.max(1));
        let pool = rng.gen_range(1..=3);
        let atoms: Vec<String> = (0..n)
            .map(|_| {
                let r = &rels[rng.gen_range(0..n_rel)];
                let args: Vec<String> = (0..r.arity).map(|_| format!("u{}", rng.gen_range(0..pool))).collect();
                atom(&r.name, &args)
            })
            .collect();
        let _ = writeln!(text, "query {}", atoms.join(", "));
    }
    parse_program(&text).unwrap_or_else(|e| panic!("generator produced an invalid program: {e}\n{text}"))
}

pub fn generate_case(seed: u64, index: usize, scale: &ScaleParams) -> Program {
    generate_program(&mut case_rng(seed, index), scale)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "kebab-case")]
pub enum CaseVerdict {
    Agree,
    /// Oracle inconclusive and pipeline negative.
    Unresolved,
    Failure(String),
}

#[derive(Clone, Debug, Serialize)]
pub struct QueryOutcome {
    pub pipeline: Option<bool>,
    pub oracle: &'static str,
    pub certified: bool,
    pub verdict: CaseVerdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseOutcome {
    pub index: usize,
    pub seed: u64,
    pub program: String,
    pub queries: Vec<QueryOutcome>,
    pub closure_size: usize,
    pub closure_bound: String,
    pub bound_ok: bool,
    pub elapsed_ms: f64,
}

impl CaseOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &str> {
        self.queries.iter().filter_map(|q| match &q.verdict {
            CaseVerdict::Failure(r) => Some(r.as_str()),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiffReport {
    pub seed: u64,
    pub cases: usize,
    pub queries: usize,
    pub failures: usize,
    pub unresolved: usize,
    pub positives: usize,
    pub certified: usize,
    pub bound_violations: usize,
    pub outcomes: Vec<CaseOutcome>,
}

impl DiffReport {
    pub fn failed_cases(&self) -> impl Iterator<Item = &CaseOutcome> {
        self.outcomes.iter().filter(|c| c.failures().next().is_some() || !c.bound_ok)
    }
}

fn oracle_label(v: &OracleVerdict) -> &'static str {
    match v {
        OracleVerdict::Entailed { .. } => "entailed",
        OracleVerdict::Unknown { terminated: true } => "not-entailed",
        OracleVerdict::Unknown { terminated: false } => "unknown",
    }
}

/// Runs one case: pipeline (with certification) against the oracle, per query.
pub fn run_case(cfg: &PipelineConfig, index: usize, inject_fault: bool) -> CaseOutcome {
    let start = Instant::now();
    let p = generate_case(cfg.seed, index, &cfg.scale);
    let program = render_program(&p);
    let prepared = match Prepared::with_fault(&p, inject_fault) {
        Ok(x) => x,
        Err(e) => {
            return CaseOutcome {
                index,
                seed: cfg.seed,
                program,
                queries: vec![QueryOutcome {
                    pipeline: None,
                    oracle: "skipped",
                    certified: false,
                    verdict: CaseVerdict::Failure(format!("preprocessing rejected a generated program: {e}")),
                }],
                closure_size: 0,
                closure_bound: "0".into(),
                bound_ok: true,
                elapsed_ms: 0.0,
            }
        }
    };
    let closure_size = prepared.saturation.closure_size();
    let bound = prepared.saturation.suitable_bound();
    let bound_ok = num_bigint::BigUint::from(closure_size) <= bound;
    let cfg = PipelineConfig { certify: true, ..*cfg };
    let mut queries = Vec::new();
    for q in &p.queries {
        let oracle = bounded_entailment_oracle(&prepared.normalized, q, cfg.oracle_budget);
        let label = oracle_label(&oracle);
        let (pipeline, certified, verdict) = match prepared.answer(q, &cfg) {
            Err(LinearOrCert::Linear(LinearError::Undecided)) => (None, false, CaseVerdict::Unresolved),
            Err(LinearOrCert::Linear(e)) => (None, false, CaseVerdict::Failure(e.to_string())),
            Err(LinearOrCert::Cert(e)) => (Some(true), false, CaseVerdict::Failure(format!("certification: {e}"))),
            Ok(a) => {
                let certified = a.certificate.as_ref().is_some_and(|c| {
                    check_proof(&prepared.normalized.tgds, &[], &c.run, q, &c.matching).is_ok()
                });
                let v = match (a.value, &oracle) {
                    (false, OracleVerdict::Entailed { .. }) => CaseVerdict::Failure("oracle entailed, pipeline said no".into()),
                    (true, _) if !certified => CaseVerdict::Failure("positive answer without a valid certificate".into()),
                    (true, o) if o.is_certain_no() => CaseVerdict::Failure("pipeline said yes on a terminated chase without a match".into()),
                    (false, OracleVerdict::Unknown { terminated: false }) => CaseVerdict::Unresolved,
                    _ => CaseVerdict::Agree,
                };
                (Some(a.value), certified, v)
            }
        };
        queries.push(QueryOutcome { pipeline, oracle: label, certified, verdict });
    }
    CaseOutcome {
        index,
        seed: cfg.seed,
        program,
        queries,
        closure_size,
        closure_bound: bound.to_string(),
        bound_ok,
        elapsed_ms: start.elapsed().as_secs_f64() * 1000.0,
    }
}

/// Runs `cases` generated cases in parallel; outcomes are ordered by case index.
pub fn differential_test(cfg: &PipelineConfig, cases: usize, inject_fault: bool) -> DiffReport {
    let outcomes: Vec<CaseOutcome> =
        with_workers(|| (0..cases).into_par_iter().map(|i| run_case(cfg, i, inject_fault)).collect());
    let all = || outcomes.iter().flat_map(|c| c.queries.iter());
    DiffReport {
        seed: cfg.seed,
        cases,
        queries: all().count(),
        failures: all().filter(|q| matches!(q.verdict, CaseVerdict::Failure(_))).count(),
        unresolved: all().filter(|q| q.verdict == CaseVerdict::Unresolved).count(),
        positives: all().filter(|q| q.pipeline == Some(true)).count(),
        certified: all().filter(|q| q.certified).count(),
        bound_violations: outcomes.iter().filter(|c| !c.bound_ok).count(),
        outcomes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::analyze_rule;

    #[test]
    fn generator_respects_scale_and_obedience() {
        let scale = ScaleParams::default();
        for i in 0..200 {
            let p = generate_case(7, i, &scale);
            assert!(p.sig.len() <= scale.max_relations);
            assert!(p.tgds.len() <= scale.max_rules);
            assert!(p.instance.len() <= scale.max_facts);
            for r in &p.tgds {
                let m = analyze_rule(r, &p.sig);
                assert!(m.is_guarded && m.obeys_side && m.width <= scale.max_width);
            }
            assert!(p.queries.iter().all(|q| q.atoms.len() <= scale.max_query_atoms));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let s = ScaleParams::default();
        assert_eq!(render_program(&generate_case(3, 5, &s)), render_program(&generate_case(3, 5, &s)));
    }

    #[test]
    fn small_differential_run_is_clean() {
        let cfg = PipelineConfig::default();
        let r = differential_test(&cfg, 40, false);
        let bad: Vec<String> = r.failed_cases().map(|c| format!("{:?}\n{}", c.failures().collect::<Vec<_>>(), c.program)).collect();
        assert!(bad.is_empty(), "{}", bad.join("\n"));
    }
}
