mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{LARGE_EPS_CONFIG, WIENER_CONFIG};
use petc_imc::cli::{build, evaluate, simulate, CheckReport};
use petc_imc::config::Config;
use petc_imc::imc::{parse_results, IntervalMarkovChain};
use petc_imc::sim::McResult;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_petc-imc"));
    cmd.env_remove("PETC_IMC_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_accepts_a_good_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", WIENER_CONFIG);
    let out = run(&["validate", "--config", s(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("controllability"));
}

#[test]
fn input_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let missing = write(&dir, "m.json", &WIENER_CONFIG.replace(r#""A": [[0.0]], "#, ""));
    let out = run(&["validate", "--config", s(&missing)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("system.A"));

    let shape = write(&dir, "d.json", &WIENER_CONFIG.replace(r#""B_w": [[1.0]]"#, r#""B_w": [[1.0], [0.0]]"#));
    assert_eq!(code(&run(&["validate", "--config", s(&shape)])), 1);

    assert_eq!(code(&run(&["validate", "--config", "/nonexistent/config.json"])), 1);
    assert_eq!(code(&run(&["simulate"])), 1);
    assert_eq!(code(&run(&["--threads", "0", "validate", "--config", s(&shape)])), 1);
}

#[test]
fn assumption_violations_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let eps = write(&dir, "e.json", &WIENER_CONFIG.replace(r#""epsilon": 1.0"#, r#""epsilon": 0.0"#));
    let out = run(&["validate", "--config", s(&eps)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));

    let uncontrollable = WIENER_CONFIG
        .replace(r#""A": [[0.0]]"#, r#""A": [[1.0, 0.0], [0.0, 1.0]]"#)
        .replace(r#""B": [[1.0]]"#, r#""B": [[1.0], [0.0]]"#)
        .replace(r#""K": [[0.0]]"#, r#""K": [[0.0, 0.0]]"#)
        .replace(r#""B_w": [[1.0]]"#, r#""B_w": [[1.0], [0.0]]"#)
        .replace(
            r#""region": {"x_lower": [-2.0], "x_upper": [2.0], "grid": [4]}"#,
            r#""region": {"x_lower": [-2.0, -2.0], "x_upper": [2.0, 2.0], "grid": [2, 2]}"#,
        );
    let p = write(&dir, "u.json", &uncontrollable);
    let out = run(&["validate", "--config", s(&p)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    let out_path = dir.path().join("imc.json");
    assert_eq!(code(&run(&["abstract", "--config", s(&p), "--out", s(&out_path)])), 2);
    assert!(!out_path.exists());
}

#[test]
fn abstract_evaluate_simulate_round_trip() {
    let dir = TempDir::new().unwrap();
    let cfg_path = write(&dir, "c.json", WIENER_CONFIG);
    let imc_path = dir.path().join("imc.json");
    let res_path = dir.path().join("results.json");
    let sim_path = dir.path().join("sim.json");

    let out = run(&["abstract", "--config", s(&cfg_path), "--out", s(&imc_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("states: 13"));
    let out = run(&["evaluate", "--config", s(&cfg_path), "--imc", s(&imc_path), "--out", s(&res_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["simulate", "--config", s(&cfg_path), "--out", s(&sim_path), "--seed", "99"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let cfg = Config::parse(WIENER_CONFIG).unwrap();
    let imc = build(&cfg).unwrap();
    let from_file = IntervalMarkovChain::read(&imc_path).unwrap();
    assert_eq!(from_file, imc);

    let vb = evaluate(&cfg, &imc).unwrap();
    let (states, vb_file, gamma) = parse_results(&std::fs::read_to_string(&res_path).unwrap()).unwrap();
    assert_eq!(states, imc.states);
    assert_eq!(vb_file, vb);
    assert_eq!(gamma, 0.9);

    let mc: McResult = serde_json::from_str(&std::fs::read_to_string(&sim_path).unwrap()).unwrap();
    assert_eq!(mc, simulate(&cfg, Some(99)).unwrap());
    assert_eq!(mc.seed, 99);

    // A second write of the read-back chain is byte-identical.
    let again = dir.path().join("again.json");
    from_file.write(&again).unwrap();
    assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(&imc_path).unwrap());
}

#[test]
fn corrupted_or_mismatched_chain_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let cfg_path = write(&dir, "c.json", WIENER_CONFIG);
    let imc_path = dir.path().join("imc.json");
    assert_eq!(code(&run(&["abstract", "--config", s(&cfg_path), "--out", s(&imc_path)])), 0);
    let text = std::fs::read_to_string(&imc_path).unwrap();

    let truncated = write(&dir, "t.json", &text[..text.len() / 2]);
    assert_eq!(code(&run(&["evaluate", "--config", s(&cfg_path), "--imc", s(&truncated)])), 1);

    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["check"][0][2] = serde_json::json!(1.5);
    let bad = write(&dir, "b.json", &doc.to_string());
    let out = run(&["evaluate", "--config", s(&cfg_path), "--imc", s(&bad)]);
    assert_eq!(code(&out), 1);

    let other = write(&dir, "o.json", &WIENER_CONFIG.replace(r#""grid": [4]"#, r#""grid": [5]"#));
    assert_eq!(code(&run(&["evaluate", "--config", s(&other), "--imc", s(&imc_path)])), 1);
}

#[test]
fn simulation_does_not_depend_on_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", WIENER_CONFIG);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert_eq!(code(&run(&["--threads", "1", "simulate", "--config", s(&cfg), "--out", s(&a)])), 0);
    let out = bin()
        .env("PETC_IMC_THREADS", "3")
        .args(["simulate", "--config", s(&cfg), "--out", s(&b)])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn check_passes_on_scalar_configs() {
    let dir = TempDir::new().unwrap();
    for (name, text) in [("w.json", WIENER_CONFIG), ("l.json", LARGE_EPS_CONFIG)] {
        let cfg = write(&dir, name, text);
        let report_path = dir.path().join(format!("report-{name}"));
        let out = run(&["check", "--config", s(&cfg), "--out", s(&report_path)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(stdout.contains("E_lo") && stdout.contains("MC estimate") && stdout.contains("E_hi"));
        let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
        assert_eq!(report["sandwich"], true);
    }
}

#[test]
fn trivial_bounds_exit_with_four() {
    // Every reward interval is [0, 1], so the bounds span the whole range.
    let cfg_text = WIENER_CONFIG
        .replace(r#"{"kind": "uniform"}"#, r#"{"kind": "point_mass", "x0": [0.5]}"#)
        .replace(
            r#"{"kind": "interevent_time"}"#,
            r#"{"kind": "table", "default": [0.0, 1.0], "unsafe": [0.0, 1.0], "r_max": 1.0}"#,
        )
        .replace(r#""paths": 4000"#, r#""paths": 200"#);
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", &cfg_text);
    let out = run(&["check", "--config", s(&cfg)]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stdout));

    let parsed = Config::parse(&cfg_text).unwrap();
    let vb = evaluate(&parsed, &build(&parsed).unwrap()).unwrap();
    let report = CheckReport::new(&vb, &simulate(&parsed, None).unwrap(), 1.0, 0.9);
    assert!(report.sandwich && !report.non_trivial);
}
