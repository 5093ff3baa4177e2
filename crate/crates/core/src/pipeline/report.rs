use serde::Serialize;
use serde_json::{json, Value};

use crate::chase::{ChaseApplication, ChaseNode, ChaseRun, ChaseStep, OracleVerdict, RuleRef, StepKind, Strategy};
use crate::dsl::render_query;
use crate::logic::{Atom, Instance, Signature, Sym, Term};

use super::{Answer, Certificate, Prepared, Timings};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Statistics {
    pub rule_count_in: usize,
    pub saturated_count: usize,
    /// Decimal; the bound overflows machine integers quickly.
    pub suitable_bound: String,
    pub childish_type_count: usize,
    pub linear_rule_count: usize,
    pub oracle_verdicts: Option<Vec<&'static str>>,
    pub disjuncts: Vec<usize>,
    pub max_search_depth: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnswerRecord {
    pub query: String,
    pub answer: bool,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub answers: Vec<AnswerRecord>,
    pub statistics: Statistics,
    pub timings_ms: Timings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Vec<Option<Value>>>,
}

fn verdict(v: &OracleVerdict) -> &'static str {
    match v {
        OracleVerdict::Entailed { .. } => "entailed",
        OracleVerdict::Unknown { terminated: true } => "not-entailed",
        OracleVerdict::Unknown { terminated: false } => "unknown",
    }
}

impl Report {
    pub fn new(p: &Prepared, answers: &[Answer], with_certificates: bool) -> Report {
        let sig = &p.normalized.sig;
        let statistics = Statistics {
            rule_count_in: p.source.tgds.len(),
            saturated_count: p.saturation.closure_size(),
            suitable_bound: p.saturation.suitable_bound().to_string(),
            childish_type_count: p.linear.catalog.len(),
            linear_rule_count: p.linear.rules.len(),
            oracle_verdicts: answers
                .iter()
                .map(|a| a.oracle.as_ref().map(verdict))
                .collect::<Option<Vec<_>>>()
                .filter(|v| !v.is_empty()),
            disjuncts: answers.iter().map(|a| a.stats.disjuncts).collect(),
            max_search_depth: answers.iter().map(|a| a.stats.chase_max_depth).collect(),
        };
        Report {
            answers: p
                .source
                .queries
                .iter()
                .zip(answers)
                .map(|(q, a)| AnswerRecord {
                    query: render_query(&p.source.sig, q),
                    answer: a.value,
                    certified: a.certificate.is_some(),
                })
                .collect(),
            statistics,
            timings_ms: p.timings.clone(),
            certificate: with_certificates
                .then(|| answers.iter().map(|a| a.certificate.as_ref().map(|c| certificate_to_json(sig, c))).collect()),
        }
    }

    /// The report with timings zeroed, for determinism checks.
    pub fn without_timings(mut self) -> Report {
        self.timings_ms = Timings::default();
        self
    }
}

/// JSON text with stable key order.
pub fn emit_report(r: &Report) -> String {
    serde_json::to_string_pretty(r).expect("reports serialize")
}

fn value_json(t: &Term) -> Value {
    match t {
        Term::Const(c) => Value::String(c.as_str().to_owned()),
        Term::Null(n) => Value::String(format!("${n}")),
        Term::Var(v) => Value::String(format!("?{v}")),
    }
}

fn atom_json(sig: &Signature, a: &Atom) -> Value {
    json!({ "rel": sig.name(a.rel), "args": a.args.iter().map(value_json).collect::<Vec<_>>() })
}

fn atoms_json(sig: &Signature, atoms: &[Atom]) -> Value {
    Value::Array(atoms.iter().map(|a| atom_json(sig, a)).collect())
}

/// Ordered step records that [`certificate_from_json`] reads back.
pub fn certificate_to_json(sig: &Signature, c: &Certificate) -> Value {
    let app = |kind: &str, a: &ChaseApplication| {
        let rule = match a.rule {
            RuleRef::Sigma(i) => json!({ "sigma": i }),
            RuleRef::Closure(i) => json!({ "closure": i }),
        };
        json!({
            "kind": kind,
            "rule": rule,
            "node": a.node,
            "trigger": a.trigger.iter().map(value_json).collect::<Vec<_>>(),
            "derived": atoms_json(sig, &a.derived),
            "child": a.child,
            "inherited": atoms_json(sig, &a.inherited),
        })
    };
    let steps: Vec<Value> = c
        .run
        .steps
        .iter()
        .map(|s| match &s.kind {
            StepKind::Chase(a) => app("chase", a),
            StepKind::RelaxedChase(a) => app("relaxed", a),
            StepKind::Propagation { facts, from, to } => {
                json!({ "kind": "propagation", "facts": atoms_json(sig, facts), "from": from, "to": to })
            }
        })
        .collect();
    json!({
        "initial": atoms_json(sig, &c.run.initial),
        "steps": steps,
        "matching": c.matching.iter().map(value_json).collect::<Vec<_>>(),
    })
}

fn parse_value(v: &Value) -> Result<Term, String> {
    let s = v.as_str().ok_or("value must be a string")?;
    if let Some(n) = s.strip_prefix('$') {
        return n.parse().map(Term::Null).map_err(|_| format!("bad null {s}"));
    }
    Ok(Term::Const(Sym::new(s)))
}

fn parse_values(v: &Value) -> Result<Vec<Term>, String> {
    v.as_array().ok_or("expected an array")?.iter().map(parse_value).collect()
}

fn parse_atoms(sig: &Signature, v: &Value) -> Result<Vec<Atom>, String> {
    v.as_array()
        .ok_or("expected an array of atoms")?
        .iter()
        .map(|a| {
            let name = a["rel"].as_str().ok_or("atom without relation")?;
            let rel = sig.lookup(name).ok_or_else(|| format!("unknown relation {name}"))?;
            Ok(Atom::new(rel, parse_values(&a["args"])?))
        })
        .collect()
}

fn idx(v: &Value) -> Result<usize, String> {
    v.as_u64().map(|n| n as usize).ok_or_else(|| "expected an index".to_owned())
}

/// Reads a certificate back as a run and a match, ready for `check_proof`.
pub fn certificate_from_json(sig: &Signature, v: &Value) -> Result<(ChaseRun, Vec<Term>), String> {
    let initial = parse_atoms(sig, &v["initial"])?;
    let mut steps = Vec::new();
    for s in v["steps"].as_array().ok_or("missing steps")? {
        let kind = match s["kind"].as_str() {
            Some("propagation") => StepKind::Propagation {
                facts: parse_atoms(sig, &s["facts"])?,
                from: idx(&s["from"])?,
                to: idx(&s["to"])?,
            },
            Some(k @ ("chase" | "relaxed")) => {
                let rule = if let Some(i) = s["rule"].get("sigma") {
                    RuleRef::Sigma(idx(i)?)
                } else {
                    RuleRef::Closure(idx(&s["rule"]["closure"])?)
                };
                let a = ChaseApplication {
                    rule,
                    node: idx(&s["node"])?,
                    trigger: parse_values(&s["trigger"])?,
                    derived: parse_atoms(sig, &s["derived"])?,
                    child: if s["child"].is_null() { None } else { Some(idx(&s["child"])?) },
                    inherited: parse_atoms(sig, &s["inherited"])?,
                };
                if k == "chase" {
                    StepKind::Chase(a)
                } else {
                    StepKind::RelaxedChase(a)
                }
            }
            _ => return Err("unknown step kind".into()),
        };
        let node = match &kind {
            StepKind::Chase(a) | StepKind::RelaxedChase(a) => a.node,
            StepKind::Propagation { to, .. } => *to,
        };
        steps.push(ChaseStep { kind, recently_updated: node });
    }
    let root = ChaseNode { id: 0, facts: initial.iter().cloned().collect::<Instance>(), parent: None, birth: None };
    let budget = steps.len();
    let run = ChaseRun { strategy: Strategy::Tree, initial, steps, nodes: vec![root], budget, exhausted: false };
    Ok((run, parse_values(&v["matching"])?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chase::check_proof;
    use crate::dsl::parse_program;
    use crate::pipeline::{answer, PipelineConfig};

    #[test]
    fn report_keys_and_certificate_round_trip() {
        let p = parse_program(
            "rel R/2\nrel U/1 side\ntgd R(x,y) -> R(y,z)\ntgd R(x,y), U(x) -> U(y)\nfact R(a,b)\nfact U(a)\nquery R(x,y), R(y,z), U(z)\nquery R(x,x)",
        )
        .unwrap();
        let cfg = PipelineConfig { certify: true, cross_check: true, ..Default::default() };
        let r = answer(&p, &cfg).unwrap();
        let text = emit_report(&r.report(true));
        for key in ["\"answers\"", "\"answer\": true", "\"ruleCountIn\"", "\"saturatedCount\"", "\"suitableBound\"", "\"childishTypeCount\"", "\"linearRuleCount\"", "\"oracleVerdicts\"", "\"timings_ms\"", "\"certificate\""] {
            assert!(text.contains(key), "{key} missing");
        }
        assert!(!emit_report(&r.report(false)).contains("\"certificate\""));
        let v: Value = serde_json::from_str(&text).unwrap();
        let sig = &r.prepared.normalized.sig;
        let (run, m) = certificate_from_json(sig, &v["certificate"][0]).unwrap();
        check_proof(&r.prepared.normalized.tgds, &[], &run, &p.queries[0], &m).unwrap();
        assert!(v["certificate"][1].is_null());
    }
}
