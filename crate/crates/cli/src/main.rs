use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gtgd::bench::bench;
use gtgd::chase::{run_chase_with_query, Strategy};
use gtgd::dsl::{parse_program_bytes, render_fact, render_program, render_query, Program};
use gtgd::fuzz::{differential_test, CaseVerdict, with_workers, WORKERS_ENV};
use gtgd::linear::EngineMode;
use gtgd::pipeline::{certificate_to_json, emit_report, Certificate, PipelineConfig, Prepared};
use gtgd::preprocess::normalize;

/// `println!` that tolerates a closed stdout (e.g. piping into `head`).
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

const USAGE: u8 = 1;
const DIAGNOSTIC: u8 = 2;

#[derive(Parser)]
#[command(name = "gtgd", version, about = "Certain answers for conjunctive queries under guarded TGDs obeying a side signature")]
#[command(after_help = format!("Environment:\n  {WORKERS_ENV}=N   worker threads for fuzz and bench runs"))]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Answer every query of a program.
    Answer {
        file: PathBuf,
        /// Write the JSON report here (`-` for standard output).
        #[arg(long)]
        json: Option<PathBuf>,
        /// Reconstruct and check a proof for every positive answer.
        #[arg(long)]
        certify: bool,
        #[arg(long, default_value = "rewrite", value_parser = parse_engine)]
        engine: EngineMode,
        /// Also run the bounded chase oracle with this step budget.
        #[arg(long)]
        budget: Option<usize>,
        /// Print the fact-saturated instance before the answers.
        #[arg(long)]
        dump_fact_closure: bool,
    },
    /// Print the normalized program.
    Normalize {
        file: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the normalized program extended with its closure rules.
    Saturate {
        file: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the linearized program with the queries.
    Linearize {
        file: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run a budgeted chase for each query.
    Oracle {
        file: PathBuf,
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        #[arg(long, default_value = "tree", value_parser = parse_strategy)]
        strategy: Strategy,
        /// Write the step records of each run here as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Differential test of the pipeline against the oracle on random programs.
    Fuzz {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        cases: usize,
        /// Oracle step budget.
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        #[arg(long, default_value = "rewrite", value_parser = parse_engine)]
        engine: EngineMode,
        #[arg(long)]
        json: Option<PathBuf>,
        /// Corrupt the saturation (checks that the harness notices).
        #[arg(long)]
        inject_fault: bool,
    },
    /// Timing suites: saturation-scaling, fact-closure-scaling, end-to-end.
    Bench {
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Cases for the end-to-end suite.
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn parse_engine(s: &str) -> Result<EngineMode, String> {
    EngineMode::parse(s).ok_or_else(|| format!("unknown engine `{s}` (rewrite, chase, both)"))
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    Strategy::parse(s).ok_or_else(|| format!("unknown strategy `{s}` (tree, one-pass, principal-exempt, shortcut)"))
}

struct Failure(u8, String);

fn diag(msg: impl std::fmt::Display) -> Failure {
    Failure(DIAGNOSTIC, msg.to_string())
}

fn load(path: &Path) -> Result<Program, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure(USAGE, format!("{}: {e}", path.display())))?;
    parse_program_bytes(&bytes).map_err(|e| diag(format!("{}:{e}", path.display())))
}

fn prepare(p: &Program) -> Result<Prepared, Failure> {
    Prepared::new(p).map_err(diag)
}

fn write_json(path: &Path, text: &str) -> Result<(), Failure> {
    if path == Path::new("-") {
        out!("{text}");
        return Ok(());
    }
    std::fs::write(path, format!("{text}\n")).map_err(|e| Failure(USAGE, format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn outp(text: &str) {
    use std::io::Write as _;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn with_queries(mut out: Program, source: &Program) -> Program {
    out.queries = source.queries.clone();
    out
}

fn run(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Answer { file, json, certify, engine, budget, dump_fact_closure } => {
            let p = load(&file)?;
            let cfg = PipelineConfig {
                engine,
                certify,
                cross_check: budget.is_some(),
                oracle_budget: budget.unwrap_or(2000),
                ..Default::default()
            };
            let result = gtgd::pipeline::answer(&p, &cfg).map_err(diag)?;
            if dump_fact_closure {
                let sig = &result.prepared.normalized.sig;
                for f in result.prepared.fact_closure.saturated.iter() {
                    out!("fact {}", render_fact(sig, f));
                }
            }
            for (q, a) in p.queries.iter().zip(&result.answers) {
                let mark = if a.certificate.is_some() { "\tcertified" } else { "" };
                out!("{}\t{}{mark}", render_query(&p.sig, q), if a.value { "YES" } else { "NO" });
            }
            if let Some(path) = json {
                write_json(&path, &emit_report(&result.report(certify)))?;
            }
        }
        Cmd::Normalize { file, json } => {
            let p = load(&file)?;
            let (n, trace) = normalize(&p).map_err(diag)?;
            outp(&render_program(&with_queries(n.clone(), &p)));
            out!("# rules: {} -> {}", p.tgds.len(), n.tgds.len());
            if let Some(path) = json {
                write_json(&path, &to_json(&trace))?;
            }
        }
        Cmd::Saturate { file, json } => {
            let p = load(&file)?;
            let prep = prepare(&p)?;
            let sat = &prep.saturation;
            let mut out = with_queries(prep.normalized.clone(), &p);
            out.tgds.extend(sat.rules());
            outp(&render_program(&out));
            out!("# closureSize: {}", sat.closure_size());
            out!("# bound: {}", sat.suitable_bound());
            if let Some(path) = json {
                let v = serde_json::json!({
                    "closureSize": sat.closure_size(),
                    "bound": sat.suitable_bound().to_string(),
                    "rules": sat.render_rules(),
                });
                write_json(&path, &to_json(&v))?;
            }
        }
        Cmd::Linearize { file, json } => {
            let p = load(&file)?;
            let prep = prepare(&p)?;
            let lin = &prep.linear;
            outp(&render_program(&with_queries(lin.to_program(), &p)));
            out!("# childishTypes: {}", lin.catalog.len());
            out!("# linearRules: {} (lift {}, instantiate {})", lin.rules.len(), lin.lift_count(), lin.instantiate_count());
            if let Some(path) = json {
                let v = serde_json::json!({
                    "childishTypes": lin.catalog.len(),
                    "rules": lin.render_rules(),
                    "decomposition": lin.decomposition,
                });
                write_json(&path, &to_json(&v))?;
            }
        }
        Cmd::Oracle { file, budget, strategy, json } => {
            let p = load(&file)?;
            let (program, closure) = match strategy {
                Strategy::Tree | Strategy::OnePass => (p.clone(), None),
                _ => {
                    let prep = prepare(&p)?;
                    let rules = prep.saturation.rules();
                    (with_queries(prep.normalized, &p), Some(rules))
                }
            };
            let mut traces = Vec::new();
            for q in &p.queries {
                let (run, found) =
                    run_chase_with_query(&program, strategy, closure.as_deref(), budget, Some(q)).map_err(diag)?;
                let verdict = match (&found, run.exhausted) {
                    (Some(_), _) => "ENTAILED",
                    (None, false) => "NOT-ENTAILED",
                    (None, true) => "UNKNOWN",
                };
                out!("{}\t{verdict}\t{} steps", render_query(&p.sig, q), run.steps.len());
                let matching = found.unwrap_or_default();
                let cert = Certificate { run, matching };
                traces.push(certificate_to_json(&program.sig, &cert));
            }
            if let Some(path) = json {
                write_json(&path, &to_json(&traces))?;
            }
        }
        Cmd::Fuzz { seed, cases, budget, engine, json, inject_fault } => {
            let cfg = PipelineConfig { seed, engine, oracle_budget: budget, ..Default::default() };
            let report = differential_test(&cfg, cases, inject_fault);
            let mut text = String::new();
            for c in report.failed_cases() {
                let _ = writeln!(text, "FAIL case {} (seed {}): {:?}", c.index, c.seed, c.failures().collect::<Vec<_>>());
                for line in c.program.lines() {
                    let _ = writeln!(text, "    {line}");
                }
            }
            for c in &report.outcomes {
                if c.queries.iter().any(|q| q.verdict == CaseVerdict::Unresolved) {
                    let _ = writeln!(text, "unresolved case {} (seed {})", c.index, c.seed);
                }
            }
            outp(&text);
            out!(
                "cases {} queries {} positives {} certified {} unresolved {} failures {} bound-violations {}",
                report.cases,
                report.queries,
                report.positives,
                report.certified,
                report.unresolved,
                report.failures,
                report.bound_violations
            );
            if let Some(path) = json {
                write_json(&path, &to_json(&report))?;
            }
            if report.failures > 0 || report.bound_violations > 0 {
                return Err(diag("differential test found failures"));
            }
        }
        Cmd::Bench { suite, seed, cases, json } => {
            let cfg = PipelineConfig { seed, ..Default::default() };
            let report = with_workers(|| bench(&suite, &cfg, cases)).map_err(|e| Failure(USAGE, e.to_string()))?;
            for pt in &report.points {
                let bound = pt.bound.as_deref().map(|b| format!("\tbound {b}")).unwrap_or_default();
                out!("{}\t{:.3} ms\tsize {}{bound}", pt.param, pt.ms, pt.size);
            }
            if let Some(f) = report.fit {
                out!("log-log slope {:.3} r2 {:.3}", f.slope, f.r2);
            }
            if let Some(path) = json {
                write_json(&path, &to_json(&report))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

