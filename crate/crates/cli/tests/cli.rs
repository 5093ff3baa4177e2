use std::path::PathBuf;
use std::process::{Command, Output};

const EX9: &str = "rel R/2\nrel U/1 side\ntgd R(x,y) -> R(y,z)\ntgd R(x,y), U(x) -> U(y)\nfact R(a,b)\nfact U(a)\n\
    query R(x,y), R(y,z), U(z)\nquery U(x)\nquery R(x,x)\n";

fn gtgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gtgd")).args(args).output().expect("binary runs")
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gtgd-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// The YES/NO column of `answer` output.
fn verdicts(o: &Output) -> Vec<String> {
    stdout(o).lines().filter_map(|l| l.split('\t').nth(1)).map(str::to_owned).collect()
}

#[test]
fn answer_prints_certified_verdicts() {
    let f = scratch("ex9.gtgd", EX9);
    let o = gtgd(&["answer", f.to_str().unwrap(), "--certify"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(verdicts(&o), ["YES", "YES", "NO"]);
    assert!(stdout(&o).lines().next().unwrap().ends_with("certified"));
}

#[test]
fn json_report_has_the_documented_keys() {
    let f = scratch("ex9-json.gtgd", EX9);
    let o = gtgd(&["answer", f.to_str().unwrap(), "--certify", "--engine", "both", "--budget", "300", "--json", "-"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let json: serde_json::Value = serde_json::from_str(&text[text.find('{').unwrap()..]).unwrap();
    for key in ["answers", "statistics", "timings_ms", "certificate"] {
        assert!(json.get(key).is_some(), "{key} missing");
    }
    assert_eq!(json["statistics"]["childishTypeCount"], 3);
}

#[test]
fn exit_codes() {
    let bad = scratch("bad.gtgd", "rel R/2\nfact R(a)\n");
    assert_eq!(gtgd(&["answer", bad.to_str().unwrap()]).status.code(), Some(2));
    let unguarded = scratch("unguarded.gtgd", "rel R/2\nrel S/2\ntgd R(x,y), R(y,z) -> S(x,z)\n");
    assert_eq!(gtgd(&["answer", unguarded.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(gtgd(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gtgd(&["bench", ""]).status.code(), Some(1));
    assert_eq!(gtgd(&["answer", "--engine", "magic", "x"]).status.code(), Some(1));
    assert_eq!(gtgd(&["--help"]).status.code(), Some(0));
}

#[test]
fn staged_commands_compose() {
    let f = scratch("compose.gtgd", EX9);
    let direct = gtgd(&["answer", f.to_str().unwrap()]);
    let mut path = f;
    for (i, stage) in ["normalize", "saturate", "linearize"].iter().enumerate() {
        let o = gtgd(&[stage, path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{stage}");
        path = scratch(&format!("stage{i}.gtgd"), &stdout(&o));
    }
    let staged = gtgd(&["answer", path.to_str().unwrap()]);
    assert_eq!(staged.status.code(), Some(0));
    assert_eq!(verdicts(&staged), verdicts(&direct));
}

#[test]
fn oracle_dumps_replayable_traces() {
    let f = scratch("oracle.gtgd", EX9);
    let out = scratch("trace.json", "");
    let o = gtgd(&["oracle", f.to_str().unwrap(), "--budget", "40", "--strategy", "one-pass", "--json", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<String> = stdout(&o).lines().map(str::to_owned).collect();
    assert!(lines[0].contains("ENTAILED") && lines[2].contains("UNKNOWN"));
    let traces: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(traces.as_array().unwrap().len(), 3);
}

#[test]
fn fuzz_passes_and_catches_an_injected_fault() {
    let ok = gtgd(&["fuzz", "--seed", "1", "--cases", "100"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("failures 0"));
    let bad = gtgd(&["fuzz", "--seed", "1", "--cases", "500", "--inject-fault"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn bench_saturation_suite_reports_bounds() {
    let o = gtgd(&["bench", "saturation-scaling"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().filter(|l| l.contains("bound")).count(), 3);
}
