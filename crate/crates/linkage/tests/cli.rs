use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use linkage::{execute, Format, RunSpec, ScenarioFile, Sweep, SweepVar};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn linkage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linkage"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn rows(csv_text: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        linkage::CSV_HEADER
    );
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

fn col(rows: &[Vec<String>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn population_sweep_has_falling_effort() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let q = scenario("quality_canonical.json");
    let res = linkage(&[
        "sweep",
        "--scenario",
        q.to_str().unwrap(),
        "--var",
        "N",
        "--values",
        "1:20",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 20);
    assert_eq!(col(&rows, 0), (1..=20).map(f64::from).collect::<Vec<_>>());
    let effort = col(&rows, 3);
    assert!(effort.windows(2).all(|w| w[1] < w[0]), "{effort:?}");
    assert_eq!(effort[1], 0.625);
}

#[test]
fn malformed_scenario_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"kind\": \"quality\", \"gaussian\": ").unwrap();
    let out = dir.path().join("out.csv");
    let res = linkage(&[
        "solve",
        "--scenario",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
    let diag: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(diag["error"], "validation");
    assert_eq!(diag["exit_code"], 2);
}

#[test]
fn structurally_invalid_scenario_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("quality_canonical.json"))
        .unwrap()
        .replace("\"var_idio_type\": 1.0", "\"var_idio_type\": 0.0");
    let path = dir.path().join("zero.json");
    std::fs::write(&path, text).unwrap();
    let res = linkage(&["solve", "--scenario", path.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn solver_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // a logistic scenario with a cost outside the supported range
    let text = std::fs::read_to_string(scenario("logistic_quality.json"))
        .unwrap()
        .replace("\"kappa\": 1.0", "\"kappa\": 0.5");
    let path = dir.path().join("soft_cost.json");
    std::fs::write(&path, text).unwrap();
    let res = linkage(&["solve", "--scenario", path.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    let diag: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(diag["error"], "solver");
}

#[test]
fn sweep_flags_are_checked() {
    let q = scenario("quality_canonical.json");
    let res = linkage(&["sweep", "--scenario", q.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let res = linkage(&[
        "solve", "--scenario", q.to_str().unwrap(), "--var", "N", "--values", "1:3",
    ]);
    assert_eq!(res.status.code(), Some(2));
    let res = linkage(&[
        "sweep", "--scenario", q.to_str().unwrap(), "--var", "N", "--values", "1.5",
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn verify_passes_on_canonical_scenarios() {
    for name in [
        "quality_canonical.json",
        "circumstance_canonical.json",
        "multilink_quality.json",
        "logistic_quality.json",
    ] {
        let res = linkage(&["verify", "--scenario", scenario(name).to_str().unwrap()]);
        let text = String::from_utf8(res.stdout).unwrap();
        assert_eq!(res.status.code(), Some(0), "{text}");
        assert!(text.lines().any(|l| l.starts_with("PASS ")));
        assert!(!text.lines().any(|l| l.starts_with("FAIL ")));
    }
}

fn load(name: &str) -> ScenarioFile {
    ScenarioFile::load(&scenario(name)).unwrap()
}

fn spec(command: linkage::Command, sweep: Option<Sweep>, format: Format) -> RunSpec {
    RunSpec {
        command,
        scenario_path: PathBuf::new(),
        sweep,
        seed: 0,
        out_path: None,
        format,
        draws: None,
    }
}

#[test]
fn solve_reports_mixed_entry() {
    let file = load("circumstance_canonical.json");
    let out = execute(&spec(linkage::Command::Solve, None, Format::Csv), &file).unwrap();
    let rows = rows(&out.text);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "mixed_entry");
    let p: f64 = rows[0][2].parse().unwrap();
    assert!((p - 0.5218148571).abs() < 1e-9);
    let a: f64 = rows[0][3].parse().unwrap();
    assert!((a - 0.48f64.sqrt()).abs() < 1e-12);

    let out = execute(&spec(linkage::Command::Solve, None, Format::Json), &file).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out.text).unwrap();
    assert_eq!(v["regime"], "mixed_entry");
}

#[test]
fn reward_sweep_marks_no_entry() {
    let file = load("circumstance_canonical.json");
    let sweep = Sweep::parse(SweepVar::R, "-0.8,-0.76,0").unwrap();
    let out = execute(&spec(linkage::Command::Sweep, Some(sweep), Format::Csv), &file).unwrap();
    let rows = rows(&out.text);
    let regimes: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(regimes, ["no_entry", "mixed_entry", "full_entry"]);
}

#[test]
fn gamma_scale_sweep_raises_circumstance_effort() {
    let mut file = load("circumstance_canonical.json");
    file.scenario.reward = 0.0;
    let sweep = Sweep::parse(SweepVar::GammaScale, "0.5:2:0.5").unwrap();
    let out = execute(&spec(linkage::Command::Sweep, Some(sweep), Format::Csv), &file).unwrap();
    let rows = rows(&out.text);
    assert_eq!(col(&rows, 0), [0.5, 1.0, 1.5, 2.0]);
    let effort = col(&rows, 3);
    assert!(effort.windows(2).all(|w| w[1] > w[0]), "{effort:?}");
}

#[test]
fn observed_links_sweep() {
    let file = load("multilink_quality.json");
    let sweep = Sweep::parse(SweepVar::ObservedM, "0:2").unwrap();
    let out = execute(&spec(linkage::Command::Sweep, Some(sweep), Format::Csv), &file).unwrap();
    let mv = col(&rows(&out.text), 4);
    let want = [2.0 / 3.0, 4.75 / 7.25, 1.8 / 2.8];
    for (a, b) in mv.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
    let too_many = Sweep::parse(SweepVar::ObservedM, "3").unwrap();
    assert!(execute(&spec(linkage::Command::Sweep, Some(too_many), Format::Csv), &file).is_err());
}

#[test]
fn sweep_value_syntax() {
    assert_eq!(Sweep::parse(SweepVar::N, "2:4").unwrap().values, [2.0, 3.0, 4.0]);
    assert_eq!(Sweep::parse(SweepVar::R, "0:0.3:0.1").unwrap().values.len(), 4);
    assert_eq!(Sweep::parse(SweepVar::R, "1,-2").unwrap().values, [1.0, -2.0]);
    assert!(Sweep::parse(SweepVar::R, "1:0").is_err());
    assert!(Sweep::parse(SweepVar::R, "a:b").is_err());
}

#[test]
fn scenario_files_round_trip() {
    for name in ["quality_canonical.json", "logistic_quality.json", "multilink_quality.json"] {
        let file = load(name);
        let text = serde_json::to_string(&file).unwrap();
        let back = ScenarioFile::from_json(&text, Path::new(name)).unwrap();
        assert_eq!(back, file);
    }
}
