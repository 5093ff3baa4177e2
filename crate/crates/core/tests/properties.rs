//! Invariants over generated programs.

use gtgd::chase::{bounded_entailment_oracle, check_proof, run_chase, OracleVerdict, Strategy};
use gtgd::dsl::{parse_program, render_program, Program};
use gtgd::factclosure::{fact_saturate, is_fact_saturated};
use gtgd::fuzz::generate_case;
use gtgd::linear::{check_linear_proof, proof_from_rewriting, tight_chase_search, ucq_rewrite};
use gtgd::logic::{Atom, Cq, Instance, Sym, Term};
use gtgd::pipeline::{answer, certificate_from_json, certificate_to_json, PipelineConfig, Prepared, ScaleParams};
use gtgd::preprocess::{check_normalized, normalize};
use gtgd::saturate::Saturation;
use proptest::prelude::*;

fn case(seed: u64) -> Program {
    generate_case(seed, 0, &ScaleParams::default())
}

fn freeze(atoms: &[Atom]) -> Instance {
    atoms
        .iter()
        .map(|a| a.map_terms(|t| match t {
            Term::Var(v) => Term::Const(Sym::new(&format!("v{v}"))),
            other => other,
        }))
        .collect()
}

fn ground(run_facts: &Instance) -> Instance {
    run_facts.iter().filter(|f| f.args.iter().all(|t| matches!(t, Term::Const(_)))).cloned().collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn dsl_round_trips(seed in any::<u64>()) {
        let p = case(seed);
        let text = render_program(&p);
        let back = parse_program(&text).unwrap();
        prop_assert_eq!(render_program(&back), text);
        let prep = Prepared::new(&p).unwrap();
        let lin = prep.linear.to_program();
        let lin_text = render_program(&lin);
        prop_assert_eq!(parse_program(&lin_text).unwrap(), lin);
    }

    #[test]
    fn normalization_is_stable(seed in any::<u64>()) {
        let (n, trace) = normalize(&case(seed)).unwrap();
        prop_assert!(check_normalized(&n).is_ok());
        prop_assert_eq!(trace.rules.len(), n.tgds.len());
        let (again, _) = normalize(&n).unwrap();
        prop_assert_eq!(again.tgds.len(), n.tgds.len());
    }

    #[test]
    fn closure_rules_are_entailed(seed in any::<u64>()) {
        let prep = Prepared::new(&case(seed)).unwrap();
        for r in prep.saturation.rules() {
            let p = Program { instance: freeze(&r.body), queries: vec![], ..prep.normalized.clone() };
            let head = freeze(&r.head).iter().next().unwrap().clone();
            let verdict = bounded_entailment_oracle(&p, &Cq::unnamed(vec![head]), 500);
            prop_assert!(verdict.is_entailed());
        }
    }

    #[test]
    fn saturation_is_deterministic(seed in any::<u64>()) {
        let p = case(seed);
        let a = Prepared::new(&p).unwrap();
        let b = Prepared::new(&p).unwrap();
        prop_assert_eq!(a.saturation.render_rules(), b.saturation.render_rules());
        prop_assert_eq!(a.linear.render_rules(), b.linear.render_rules());
    }

    #[test]
    fn fact_closure_is_sound_complete_and_idempotent(seed in any::<u64>()) {
        let (n, _) = normalize(&case(seed)).unwrap();
        let mut sat = Saturation::saturate(&n);
        let fc = fact_saturate(&mut sat, &n.instance);
        prop_assert!(n.instance.iter().all(|f| fc.saturated.contains(f)));
        prop_assert_eq!(fc.saturated.adom(), n.instance.adom());
        prop_assert!(is_fact_saturated(&mut sat, &fc.saturated));
        for f in &fc.added {
            let verdict = bounded_entailment_oracle(&n, &Cq::unnamed(vec![f.clone()]), 2000);
            prop_assert!(verdict.is_entailed(), "added fact not entailed");
        }
        let run = run_chase(&n, Strategy::Tree, None, 2000).unwrap();
        let adom = n.instance.adom();
        for f in ground(&run.union()).iter().filter(|f| f.args.iter().all(|t| adom.contains(t))) {
            prop_assert!(fc.saturated.contains(f), "entailed fact missing from the fact closure");
        }
    }

    #[test]
    fn linear_rules_and_decomposition(seed in any::<u64>()) {
        let prep = Prepared::new(&case(seed)).unwrap();
        let lin = &prep.linear;
        prop_assert!(lin.rules.iter().all(|r| r.is_linear() && r.head.len() == 1));
        prop_assert!(lin.decomposition.verify(&lin.rules));
        prop_assert!(lin.decomposition.w <= lin.w_prime);
    }

    #[test]
    fn every_matching_disjunct_replays(seed in any::<u64>()) {
        let p = case(seed);
        let prep = Prepared::new(&p).unwrap();
        let lin = &prep.linear;
        for q in &p.queries {
            let Ok(ucq) = ucq_rewrite(q, &lin.rules, 2000) else { continue };
            for (i, d) in ucq.disjuncts.iter().enumerate() {
                if let Some(s) = gtgd::logic::first_hom(&d.atoms, &lin.instance, &[]) {
                    let proof = proof_from_rewriting(&ucq, &lin.rules, &lin.instance, i, gtgd::logic::total(&s));
                    prop_assert!(check_linear_proof(&lin.rules, &lin.instance, &proof, q).is_ok());
                }
            }
        }
    }

    #[test]
    fn hop_pruning_keeps_answers(seed in any::<u64>()) {
        let p = case(seed);
        let prep = Prepared::new(&p).unwrap();
        let lin = &prep.linear;
        for q in &p.queries {
            let plain = tight_chase_search(q, &lin.rules, &lin.instance, 6, 20_000, false);
            let pruned = tight_chase_search(q, &lin.rules, &lin.instance, 6, 20_000, true);
            if plain.complete && pruned.complete {
                prop_assert_eq!(plain.proof.is_some(), pruned.proof.is_some());
            }
            prop_assert!(pruned.stats.expanded <= plain.stats.expanded || !plain.complete);
            if let Some(proof) = &pruned.proof {
                prop_assert!(check_linear_proof(&lin.rules, &lin.instance, proof, q).is_ok());
            }
        }
    }

    #[test]
    fn oracle_runs_are_proofs(seed in any::<u64>()) {
        let p = case(seed);
        for q in &p.queries {
            if let OracleVerdict::Entailed { matching, run } = bounded_entailment_oracle(&p, q, 2000) {
                prop_assert!(check_proof(&p.tgds, &[], &run, q, &matching).is_ok());
            }
        }
    }

    #[test]
    fn reports_are_deterministic_and_certificates_round_trip(seed in any::<u64>()) {
        let p = case(seed);
        let cfg = PipelineConfig { certify: true, ..Default::default() };
        let a = answer(&p, &cfg).unwrap();
        let b = answer(&p, &cfg).unwrap();
        prop_assert_eq!(a.report(true).without_timings(), b.report(true).without_timings());
        let sig = &a.prepared.normalized.sig;
        for (q, ans) in p.queries.iter().zip(&a.answers) {
            prop_assert_eq!(ans.value, ans.certificate.is_some());
            if let Some(c) = &ans.certificate {
                let (run, m) = certificate_from_json(sig, &certificate_to_json(sig, c)).unwrap();
                prop_assert!(check_proof(&a.prepared.normalized.tgds, &[], &run, q, &m).is_ok());
            }
        }
    }

    #[test]
    fn engines_agree(seed in any::<u64>()) {
        let p = case(seed);
        let prep = Prepared::new(&p).unwrap();
        for q in &p.queries {
            let rw = prep.answer(q, &PipelineConfig::default());
            let both = prep.answer(q, &PipelineConfig { engine: gtgd::linear::EngineMode::Both, ..Default::default() });
            if let (Ok(a), Ok(b)) = (rw, both) {
                prop_assert_eq!(a.value, b.value);
            }
        }
    }
}

#[test]
fn side_free_scale_has_no_failures() {
    let scale = ScaleParams { max_side_arity: 0, ..ScaleParams::default() };
    let cfg = PipelineConfig { scale, ..Default::default() };
    let r = gtgd::fuzz::differential_test(&cfg, 200, false);
    assert_eq!(r.failures, 0);
    assert!(r.outcomes.iter().all(|c| !c.program.contains(" side")));
}
