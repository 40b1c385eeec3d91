use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cliffsemi::commands::algebra_checks;
use cliffsemi::report::Check;
use cliffsemi_core::clifford::CliffordElement;
use cliffsemi_core::random::seeded;
use serde_json::Value;
use tempfile::TempDir;

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str], config: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cliffsemi"));
    cmd.args(args).arg("--config").arg(config);
    match threads {
        Some(t) => cmd.env("CLIFFSEMI_THREADS", t),
        None => cmd.env_remove("CLIFFSEMI_THREADS"),
    };
    cmd.output().unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn checks(record: &Value) -> Vec<(String, f64, bool)> {
    record["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (c["name"].as_str().unwrap().to_string(), c["value"].as_f64().unwrap(), c["pass"].as_bool().unwrap()))
        .collect()
}

/// `-Id` over `Cl(0,1)^1`.
fn minus_identity(dir: &Path) -> PathBuf {
    write_config(dir, "minus_id.json", r#"{"n": 1, "d": 1, "entries": [[{"n": 1, "coeffs": [-1.0, 0.0]}]]}"#)
}

fn scalar_of(op: &Value) -> f64 {
    op["entries"][0][0]["coeffs"][0].as_f64().unwrap()
}

#[test]
fn gen_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"seed": 1, "n": 2, "d": 2}"#);
    let a = run(&["gen"], &cfg, None);
    let b = run(&["gen"], &cfg, Some("3"));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["seed"], 1);
    assert_eq!(v["operator"]["entries"].as_array().unwrap().len(), 2);
}

#[test]
fn gen_reports_requested_margin() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"margin": 1.0, "n": 3, "d": 2}"#);
    let v: Value = serde_json::from_slice(&run(&["gen"], &cfg, None).stdout).unwrap();
    let omega = v["omega"].as_f64().unwrap();
    assert!(omega <= -1.0 + 0.01 + 1e-9, "omega {omega}");
    assert!((v["abscissa"].as_f64().unwrap() + 1.0).abs() < 1e-9);
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = TempDir::new().unwrap();
    for body in [r#"{"n": 9}"#, r#"{"tol": -1}"#, "not json", r#"{"polynomial": [1.0, 0.0]}"#] {
        let cfg = write_config(dir.path(), "bad.json", body);
        let out = run(&["gen"], &cfg, None);
        assert_eq!(out.status.code(), Some(2), "{body}");
    }
    let out = run(&["invert"], &dir.path().join("missing.json"), None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_output_feeds_invert() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "g.json", r#"{"seed": 4, "n": 1, "d": 3}"#);
    fs::write(dir.path().join("op.json"), run(&["gen"], &cfg, None).stdout).unwrap();
    let cfg = write_config(dir.path(), "i.json", r#"{"n": 1, "d": 3, "operator": "op.json"}"#);
    let out = run(&["invert"], &cfg, None);
    assert!(out.status.success());
    assert_eq!(report(&out)["records"][0]["status"], "pass");
}

#[test]
fn scalar_inverse_is_one_sixth() {
    let dir = TempDir::new().unwrap();
    minus_identity(dir.path());
    let cfg = write_config(dir.path(), "c.json", r#"{"n": 1, "d": 1, "operator": "minus_id.json", "polynomial": [2.0, -3.0, 1.0]}"#);
    let out = run(&["invert"], &cfg, None);
    assert!(out.status.success());
    let rec = &report(&out)["records"][0];
    assert_eq!(rec["status"], "pass");
    assert!((scalar_of(&rec["output"]["p_inverse"]) - 1.0 / 6.0).abs() < 1e-9);
}

#[test]
fn violated_hypothesis_is_skipped() {
    let dir = TempDir::new().unwrap();
    minus_identity(dir.path());
    // P(x) = (x + 2)(x - 1) has r_P = -2 < ω
    let cfg = write_config(dir.path(), "c.json", r#"{"n": 1, "d": 1, "operator": "minus_id.json", "polynomial": [-2.0, 1.0, 1.0]}"#);
    let out = run(&["invert"], &cfg, None);
    assert_eq!(out.status.code(), Some(0));
    let v = report(&out);
    assert_eq!(v["records"][0]["status"], "skipped");
    assert_eq!(v["summary"]["skipped"], 1);
    assert!(v["records"][0]["error"].as_str().unwrap().contains("hypothesis"));
}

#[test]
fn twenty_seed_sweep_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"cases": 20, "n": 2, "d": 2}"#);
    let out = run(&["invert"], &cfg, None);
    assert!(out.status.success());
    let v = report(&out);
    assert_eq!(v["summary"]["passed"], 20);
    for rec in v["records"].as_array().unwrap() {
        for (name, value, pass) in checks(rec) {
            assert!(pass && value <= 1e-6, "{name} = {value}");
        }
    }
}

#[test]
fn resolvent_bound_for_zero_generator() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), "zero.json", r#"{"n": 1, "d": 1, "entries": [[{"n": 1, "coeffs": [0.0, 0.0]}]]}"#);
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"n": 1, "d": 1, "operator": "zero.json", "growth": {"omega": 0.0, "m": 1.0}, "q": {"a": 2.0}}"#,
    );
    let out = run(&["resolvent"], &cfg, None);
    assert!(out.status.success());
    let rec = &report(&out)["records"][0];
    assert_eq!(rec["status"], "pass");
    let bound_q = rec["bounds"].as_array().unwrap().iter().find(|b| b["name"] == "bound_q").unwrap();
    assert_eq!(bound_q["bound"].as_f64().unwrap(), 0.25);
    assert!((scalar_of(&rec["output"]["quasi_resolvent"]) - 0.25).abs() < 1e-9);
}

#[test]
fn real_q_and_vanishing_imaginary_part_agree() {
    let dir = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for b in ["0.0", "1e-9"] {
        let body = format!(r#"{{"seed": 3, "n": 2, "d": 2, "q": {{"a": 1.5, "b": {b}}}, "power": 3}}"#);
        let cfg = write_config(dir.path(), "c.json", &body);
        let out = run(&["resolvent"], &cfg, None);
        assert!(out.status.success());
        let rec = report(&out)["records"][0].clone();
        assert_eq!(rec["status"], "pass");
        outputs.push(rec["output"].clone());
    }
    for key in ["quasi_resolvent", "resolvent", "quasi_resolvent_power"] {
        let flat = |v: &Value| -> Vec<f64> {
            v[key]["entries"]
                .as_array()
                .unwrap()
                .iter()
                .flat_map(|row| row.as_array().unwrap().iter())
                .flat_map(|e| e["coeffs"].as_array().unwrap().iter().map(|c| c.as_f64().unwrap()))
                .collect()
        };
        for (x, y) in flat(&outputs[0]).iter().zip(flat(&outputs[1])) {
            assert!((x - y).abs() < 1e-8, "{key}: {x} vs {y}");
        }
    }
}

#[test]
fn cube_power_matches_oracle_for_n3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"seed": 11, "n": 3, "d": 2, "power": 3, "cases": 3}"#);
    let out = run(&["resolvent"], &cfg, None);
    assert!(out.status.success());
    for rec in report(&out)["records"].as_array().unwrap() {
        let (_, value, pass) = checks(rec).into_iter().find(|c| c.0 == "quasi_resolvent_power_vs_oracle").unwrap();
        assert!(pass && value <= 1e-6);
    }
}

#[test]
fn verify_defaults_pass_and_empty_file_is_accepted() {
    let dir = TempDir::new().unwrap();
    let empty = write_config(dir.path(), "empty.json", "");
    let braces = write_config(dir.path(), "braces.json", "{}");
    let a = run(&["verify"], &empty, None);
    let b = run(&["verify"], &braces, None);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, b.stdout);
    let v = report(&a);
    assert_eq!(v["summary"]["passed"], 1);
    let names: Vec<String> = checks(&v["records"][0]).into_iter().map(|c| c.0).collect();
    for want in ["n2_anti_automorphism", "zero_divisor_1_minus_e123", "g_p_ode_residual", "lap_g_q_delta", "lap_g_q_corrector", "conv_power_bound_violations"] {
        assert!(names.iter().any(|n| n == want), "missing {want}");
    }
}

#[test]
fn flipped_conjugation_breaks_anti_automorphism() {
    let flipped = |x: &CliffordElement| {
        let mut c = x.conjugate().coeffs().to_vec();
        c[0b1] = -c[0b1];
        CliffordElement::new(x.n(), c).unwrap()
    };
    let mut rng = seeded(0);
    let found = algebra_checks(2, 50, &mut rng, &flipped).unwrap();
    let get = |name: &str| found.iter().find(|c: &&Check| c.name == name).unwrap().pass;
    assert!(!get("n2_anti_automorphism"));
    let honest = algebra_checks(2, 50, &mut seeded(0), &|x: &CliffordElement| x.conjugate()).unwrap();
    assert!(honest.iter().all(|c| c.pass));
}

#[test]
fn reports_are_deterministic_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"seed": 5, "cases": 6, "n": 2, "d": 2}"#);
    let a = run(&["resolvent"], &cfg, Some("1"));
    let b = run(&["resolvent"], &cfg, Some("4"));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let cases: Vec<u64> = report(&a)["records"].as_array().unwrap().iter().map(|r| r["case"].as_u64().unwrap()).collect();
    assert_eq!(cases, (0..6).collect::<Vec<_>>());
}

#[test]
fn out_writes_json_and_csv_mirror() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"cases": 2}"#);
    let target = dir.path().join("r.json");
    let out = run(&["invert", "--seed", "9", "--tol", "1e-9", "--out", target.to_str().unwrap()], &cfg, None);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["config"]["seed"], 9);
    assert_eq!(v["config"]["tol"], 1e-9);
    assert!(v["config"].get("out").is_none());
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "case,seed,status,kind,name,value,limit,pass");
    assert_eq!(lines.count(), 6);
}

#[test]
fn timings_only_with_flag() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", "{}");
    let plain = report(&run(&["invert"], &cfg, None));
    assert!(plain["records"][0].get("millis").is_none());
    let timed = report(&run(&["invert", "--timings"], &cfg, None));
    assert!(timed["records"][0]["millis"].as_f64().unwrap() >= 0.0);
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", "{}");
    assert_eq!(run(&["invert"], &cfg, Some("zero")).status.code(), Some(2));
}
