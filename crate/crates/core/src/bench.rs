//! Timing suites over parameter sweeps.

use std::fmt::Write as _;
use std::time::Instant;

use num_bigint::BigUint;
use rand::Rng;
use serde::Serialize;

use crate::dsl::{parse_program, Program};
use crate::factclosure::fact_saturate;
use crate::fuzz::{case_rng, generate_case};
use crate::logic::{Atom, Instance, Sym, Term};
use crate::pipeline::{PipelineConfig, Prepared};
use crate::preprocess::normalize;
use crate::saturate::Saturation;

pub const SUITES: [&str; 3] = ["saturation-scaling", "fact-closure-scaling", "end-to-end"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown bench suite `{0}` (expected one of saturation-scaling, fact-closure-scaling, end-to-end)")]
pub struct UnknownSuite(pub String);

#[derive(Clone, Debug, Serialize)]
pub struct BenchPoint {
    /// The swept parameter (side relations, instance size or case index).
    pub param: usize,
    pub ms: f64,
    /// Suite-specific size measure: closure size, saturated facts, or linear rules.
    pub size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<String>,
}

/// Least-squares fit of log(ms) against log(param).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub suite: String,
    pub points: Vec<BenchPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<LogLogFit>,
    /// Every point stays within its bound (saturation suite only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds_hold: Option<bool>,
}

pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> LogLogFit {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(1e-6).ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    LogLogFit { slope, r2 }
}

fn median_ms(reps: usize, mut f: impl FnMut()) -> f64 {
    let mut ts: Vec<f64> = (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64() * 1000.0
        })
        .collect();
    ts.sort_by(f64::total_cmp);
    ts[ts.len() / 2]
}

/// A width-2 program with a ternary principal relation and `n_side` unary side relations.
pub fn saturation_program(n_side: usize) -> Program {
    let mut text = String::from("rel R/3\nrel P/2\ntgd R(x,y,z) -> R(y,z,w)\ntgd R(x,y,z) -> P(y,z)\ntgd P(x,y) -> R(x,y,w)\n");
    for i in 0..n_side {
        let _ = writeln!(text, "rel S{i}/1 side");
    }
    for i in 0..n_side {
        let _ = writeln!(text, "tgd R(x,y,z), S{i}(x) -> S{i}(z)");
        let _ = writeln!(text, "tgd P(x,y), S{i}(y) -> S{}(x)", (i + 1) % n_side);
    }
    parse_program(&text).expect("valid bench program")
}

/// The fixed rules of the fact-closure sweep: one binary principal relation,
/// one unary side relation, width 2.
pub const FACT_RULES: &str = "rel R/2\nrel U/1 side\nrel V/1 side\n\
    tgd R(x,y) -> R(y,z)\n\
    tgd R(x,y), U(x) -> U(y)\n\
    tgd R(x,y), U(y) -> V(x)\n\
    tgd R(x,y), V(x) -> R(y,x)\n";

/// `n` random facts over `n / 2 + 1` constants, a tenth of them side facts.
pub fn fact_instance(p: &Program, n: usize, seed: u64) -> Instance {
    let mut rng = case_rng(seed, n);
    let r = p.sig.lookup("R").expect("R declared");
    let u = p.sig.lookup("U").expect("U declared");
    let dom = n / 2 + 1;
    let c = |i: usize| Term::Const(Sym::new(&format!("c{i}")));
    let mut inst = Instance::new();
    while inst.len() < n {
        if rng.gen_ratio(1, 10) {
            inst.insert(Atom::new(u, vec![c(rng.gen_range(0..dom))]));
        } else {
            inst.insert(Atom::new(r, vec![c(rng.gen_range(0..dom)), c(rng.gen_range(0..dom))]));
        }
    }
    inst
}

pub fn saturation_scaling() -> BenchReport {
    let mut points = Vec::new();
    let mut ok = true;
    for n_side in 0..=2 {
        let (p, _) = normalize(&saturation_program(n_side)).expect("normalizes");
        let mut sat = None;
        let ms = median_ms(3, || sat = Some(Saturation::saturate(&p)));
        let sat = sat.expect("ran");
        let bound = sat.suitable_bound();
        ok &= BigUint::from(sat.closure_size()) <= bound;
        points.push(BenchPoint { param: n_side, ms, size: sat.closure_size(), bound: Some(bound.to_string()) });
    }
    BenchReport { suite: "saturation-scaling".into(), points, fit: None, bounds_hold: Some(ok) }
}

pub fn fact_closure_scaling(sizes: &[usize]) -> BenchReport {
    let (p, _) = normalize(&parse_program(FACT_RULES).expect("valid")).expect("normalizes");
    let mut sat = Saturation::saturate(&p);
    // Warm the demand-driven saturation so the sweep measures fact closure only.
    fact_saturate(&mut sat, &fact_instance(&p, 50, 0));
    let mut points = Vec::new();
    for &n in sizes {
        let inst = fact_instance(&p, n, 1);
        let mut size = 0;
        let reps = if n <= 1000 { 7 } else { 3 };
        let ms = median_ms(reps, || size = fact_saturate(&mut sat, &inst).saturated.len());
        points.push(BenchPoint { param: n, ms, size, bound: None });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.param as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.ms).collect();
    let fit = loglog_fit(&xs, &ys);
    BenchReport { suite: "fact-closure-scaling".into(), points, fit: Some(fit), bounds_hold: None }
}

pub fn end_to_end(cfg: &PipelineConfig, cases: usize) -> BenchReport {
    let mut points = Vec::new();
    for i in 0..cases {
        let p = generate_case(cfg.seed, i, &cfg.scale);
        let t = Instant::now();
        let Ok(prep) = Prepared::new(&p) else { continue };
        let size = prep.linear.rules.len();
        for q in &p.queries {
            let _ = prep.answer(q, cfg);
        }
        points.push(BenchPoint { param: i, ms: t.elapsed().as_secs_f64() * 1000.0, size, bound: None });
    }
    BenchReport { suite: "end-to-end".into(), points, fit: None, bounds_hold: None }
}

pub const FACT_SIZES: [usize; 7] = [10, 30, 100, 300, 1000, 3000, 10000];

pub fn bench(suite: &str, cfg: &PipelineConfig, cases: usize) -> Result<BenchReport, UnknownSuite> {
    match suite {
        "saturation-scaling" => Ok(saturation_scaling()),
        "fact-closure-scaling" => Ok(fact_closure_scaling(&FACT_SIZES)),
        "end-to-end" => Ok(end_to_end(cfg, cases)),
        other => Err(UnknownSuite(other.to_owned())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_power_law() {
        let xs = [10.0, 100.0, 1000.0];
        let f = loglog_fit(&xs, &xs.map(|x| 3.0 * x * x));
        assert!((f.slope - 2.0).abs() < 1e-9 && f.r2 > 0.999);
    }

    #[test]
    fn saturation_points_respect_the_bound() {
        let r = saturation_scaling();
        assert_eq!(r.points.len(), 3);
        assert_eq!(r.bounds_hold, Some(true));
    }

    #[test]
    fn unknown_suite_is_rejected() {
        assert_eq!(bench("", &PipelineConfig::default(), 1).unwrap_err(), UnknownSuite(String::new()));
    }

    #[test]
    fn fact_instances_have_the_requested_size() {
        let p = parse_program(FACT_RULES).unwrap();
        assert_eq!(fact_instance(&p, 100, 3).len(), 100);
    }
}
