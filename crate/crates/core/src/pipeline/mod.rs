//! normalize → saturate → fact closure → linearize → linear decision, with
//! optional certification of positive answers.

mod certify;
mod report;

pub use certify::{certify, Certificate, CertificationFailure};
pub use report::{certificate_from_json, certificate_to_json, emit_report, AnswerRecord, Report, Statistics};

use std::time::Instant;

use serde::Serialize;

use crate::chase::{bounded_entailment_oracle, OracleVerdict};
use crate::dsl::Program;
use crate::factclosure::{fact_saturate, FactClosureResult};
use crate::linear::{decide_linear, EngineMode, LinearBudgets, LinearError, LinearStats};
use crate::linearize::{linearize, LinearProgram};
use crate::logic::Cq;
use crate::preprocess::{normalize, PreprocessError};
use crate::saturate::Saturation;

/// Bounds of the random program generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ScaleParams {
    pub max_relations: usize,
    pub max_arity: usize,
    pub max_side_arity: usize,
    pub max_width: usize,
    pub max_rules: usize,
    pub max_facts: usize,
    pub max_query_atoms: usize,
}

impl Default for ScaleParams {
    fn default() -> Self {
        ScaleParams {
            max_relations: 4,
            max_arity: 3,
            max_side_arity: 1,
            max_width: 2,
            max_rules: 5,
            max_facts: 6,
            max_query_atoms: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PipelineConfig {
    pub engine: EngineMode,
    /// Step budget of the bounded chase oracle.
    pub oracle_budget: usize,
    pub linear: LinearBudgets,
    pub certify: bool,
    /// Also run the bounded oracle on each query and report its verdict.
    pub cross_check: bool,
    pub seed: u64,
    pub scale: ScaleParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            engine: EngineMode::Rewrite,
            oracle_budget: 2000,
            linear: LinearBudgets::default(),
            certify: false,
            cross_check: false,
            seed: 1,
            scale: ScaleParams::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error("query {query}: {source}")]
    Linear { query: usize, source: LinearError },
    #[error("query {query}: {source}")]
    Certification { query: usize, source: CertificationFailure },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Timings {
    pub normalize: f64,
    pub saturate: f64,
    pub fact_closure: f64,
    pub linearize: f64,
    pub decide: f64,
    pub certify: f64,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

/// The query-independent stages, computed once per program.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub source: Program,
    pub normalized: Program,
    pub saturation: Saturation,
    pub fact_closure: FactClosureResult,
    pub linear: LinearProgram,
    pub timings: Timings,
}

impl Prepared {
    pub fn new(p: &Program) -> Result<Prepared, PreprocessError> {
        Prepared::with_fault(p, false)
    }

    /// Runs the stages; `fault` corrupts the saturation (mutation testing only).
    pub fn with_fault(p: &Program, fault: bool) -> Result<Prepared, PreprocessError> {
        let mut timings = Timings::default();
        let t = Instant::now();
        let (normalized, _) = normalize(p)?;
        timings.normalize = ms(t);
        let t = Instant::now();
        let mut saturation = Saturation::saturate_with(&normalized, fault);
        timings.saturate = ms(t);
        let t = Instant::now();
        let fact_closure = fact_saturate(&mut saturation, &normalized.instance);
        timings.fact_closure = ms(t);
        let t = Instant::now();
        let linear = linearize(&mut saturation, &fact_closure.saturated);
        timings.linearize = ms(t);
        Ok(Prepared { source: p.clone(), normalized, saturation, fact_closure, linear, timings })
    }

    /// Answers one query; with `certify` set, a positive answer carries a checked Σ-proof.
    pub fn answer(&self, q: &Cq, cfg: &PipelineConfig) -> Result<Answer, LinearOrCert> {
        let t = Instant::now();
        let d = decide_linear(q, &self.linear.rules, &self.linear.instance, &self.linear.decomposition, cfg.engine, cfg.linear)
            .map_err(LinearOrCert::Linear)?;
        let decide_ms = ms(t);
        let t = Instant::now();
        let certificate = match (&d.proof, cfg.certify && d.value) {
            (Some(proof), true) => Some(
                certify(
                    &self.normalized.tgds,
                    &self.normalized.instance,
                    &self.saturation,
                    &self.fact_closure,
                    &self.linear,
                    proof,
                    q,
                )
                .map_err(LinearOrCert::Cert)?,
            ),
            _ => None,
        };
        let certify_ms = ms(t);
        let oracle = cfg.cross_check.then(|| bounded_entailment_oracle(&self.normalized, q, cfg.oracle_budget));
        Ok(Answer { value: d.value, certificate, stats: d.stats, decide_ms, certify_ms, oracle })
    }
}

#[derive(Debug)]
pub enum LinearOrCert {
    Linear(LinearError),
    Cert(CertificationFailure),
}

#[derive(Clone, Debug)]
pub struct Answer {
    pub value: bool,
    pub certificate: Option<Certificate>,
    pub stats: LinearStats,
    pub decide_ms: f64,
    pub certify_ms: f64,
    pub oracle: Option<OracleVerdict>,
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub prepared: Prepared,
    pub answers: Vec<Answer>,
}

impl PipelineResult {
    pub fn report(&self, with_certificates: bool) -> Report {
        Report::new(&self.prepared, &self.answers, with_certificates)
    }
}

/// Runs the whole pipeline on every query of `p`.
pub fn answer(p: &Program, cfg: &PipelineConfig) -> Result<PipelineResult, PipelineError> {
    let mut prepared = Prepared::new(p)?;
    let mut answers = Vec::new();
    for (i, q) in p.queries.iter().enumerate() {
        let a = prepared.answer(q, cfg).map_err(|e| match e {
            LinearOrCert::Linear(source) => PipelineError::Linear { query: i, source },
            LinearOrCert::Cert(source) => PipelineError::Certification { query: i, source },
        })?;
        prepared.timings.decide += a.decide_ms;
        prepared.timings.certify += a.certify_ms;
        answers.push(a);
    }
    Ok(PipelineResult { prepared, answers })
}
