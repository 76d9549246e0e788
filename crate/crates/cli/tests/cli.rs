use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn weakkam(cmd: &str, config: &str, dir: &Path, envs: &[(&str, &str)]) -> Output {
    let cfg = dir.join(format!("{cmd}.json"));
    fs::write(&cfg, config).unwrap();
    let mut c = Command::new(env!("CARGO_BIN_EXE_weakkam"));
    c.arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"));
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const EIKONAL: &str = r#""hamiltonian": {"builtin": "eikonal", "params": {"V": "cos(2*pi*x)"}}"#;

#[test]
fn critical_on_eikonal() {
    let dir = TempDir::new().unwrap();
    let o = weakkam(
        "critical",
        &format!(r#"{{"command": "critical", {EIKONAL}}}"#),
        dir.path(),
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    let c: f64 = s
        .trim()
        .strip_prefix("c=")
        .and_then(|r| r.split('±').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((c - 1.0).abs() < 2e-2, "{s}");
    for f in ["critical.csv", "corrector.csv"] {
        let text = fs::read_to_string(dir.path().join("out").join(f)).unwrap();
        assert!(text.starts_with("# config: {"), "{f}");
        assert!(text.contains("\"n\":256"));
    }
    let csv = fs::read_to_string(dir.path().join("out/critical.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("lambda,mean_lambda_u"));
    assert!(!dir.path().join("out/.weakkam.lock").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let o = weakkam(
        "evolve",
        r#"{"hamiltonian": {"builtin": "linear_contact", "params": {"a": 1}}, "numerics": {"dt": 1.0}}"#,
        dir.path(),
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("dt*Lambda exceeds 1/2"),
        "{}",
        stderr(&o)
    );
    assert!(dir.path().join("out/diagnostic.txt").exists());

    let o = weakkam("critical", "{\"hamiltonian\": ", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));

    let o = weakkam(
        "critical",
        &format!(r#"{{{EIKONAL}}}"#),
        dir.path(),
        &[("WEAKKAM_THREADS", "zero")],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn disagreement_exits_3() {
    let dir = TempDir::new().unwrap();
    let o = weakkam(
        "critical",
        &format!(r#"{{{EIKONAL}, "numerics": {{"n": 64, "cross_tol": 1e-12}}}}"#),
        dir.path(),
        &[],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let diag = fs::read_to_string(dir.path().join("out/diagnostic.txt")).unwrap();
    assert!(diag.contains("estimators disagree"), "{diag}");
}

#[test]
fn locked_directory_is_refused() {
    let dir = TempDir::new().unwrap();
    fs::create_dir_all(dir.path().join("out")).unwrap();
    fs::write(dir.path().join("out/.weakkam.lock"), "1").unwrap();
    let o = weakkam("critical", &format!(r#"{{{EIKONAL}}}"#), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("locked"));
}

#[test]
fn instability_escape() {
    let dir = TempDir::new().unwrap();
    let o = weakkam(
        "instability",
        r#"{"hamiltonian": {"builtin": "linear_contact", "params": {"a": -1}},
            "u_minus": "0", "numerics": {"n": 64, "eps": 0.01, "Delta": 0.5}}"#,
        dir.path(),
        &[("WEAKKAM_THREADS", "2")],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.starts_with("escaped t=3.9"), "{s}");
    let csv = fs::read_to_string(dir.path().join("out/instability.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("t,sup_dev"));
}

#[test]
fn stability_on_example_ex() {
    let dir = TempDir::new().unwrap();
    let o = weakkam(
        "example-ex",
        r#"{"example_ex": {"theta": 0.5, "zeta": 1}, "numerics": {"n": 128, "dt": 0.01}}"#,
        dir.path(),
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("A3 holds"), "{}", stdout(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap())
            .unwrap();
    let r = &report["report"];
    assert_eq!(r["verdict"], "holds");
    assert!((r["A_estimate"].as_f64().unwrap() - 0.5).abs() < 5e-2);
    assert!(r["decay_slope"].as_f64().unwrap() <= -0.25);
    assert_eq!(report["config"]["command"], "example-ex");

    let o = weakkam(
        "stability",
        r#"{"hamiltonian": {"builtin": "example_ex", "params": {"phi": "sin(2*pi*x)/(2*pi)", "dphi": "cos(2*pi*x)", "theta": 0.5, "zeta": 1}},
            "u_minus": "sin(2*pi*x)/(2*pi)", "numerics": {"n": 128, "dt": 0.01}}"#,
        dir.path(),
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(
        stdout(&o).contains("holds") && stdout(&o).contains("A_estimate=0.5"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"hamiltonian": {"builtin": "linear_contact", "params": {"a": 1, "V": "cos(2*pi*x)"}},
                  "phi0": "sin(2*pi*x)", "numerics": {"n": 64, "T": 0.5, "property_trials": 5}, "seed": 3}"#;
    let a = weakkam("evolve", cfg, dir.path(), &[]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let first = fs::read(dir.path().join("out/evolve.csv")).unwrap();
    let b = weakkam("evolve", cfg, dir.path(), &[("WEAKKAM_THREADS", "1")]);
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(first, fs::read(dir.path().join("out/evolve.csv")).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.trim_end().lines().last().unwrap().split(',').count() == 2);
    assert!(text.contains("steps,final_residual"));
}

#[test]
fn remaining_commands_run() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("stationary", r#"{"hamiltonian": {"builtin": "linear_contact", "params": {"a": 1, "V": "cos(2*pi*x)"}}, "numerics": {"n": 64, "dt": 0.01}}"#.to_string(), "stationary.csv"),
        ("ceps", r#"{"hamiltonian": {"builtin": "linear_contact", "params": {"a": 1}}, "u_minus": "0", "numerics": {"n": 64}}"#.to_string(), "ceps.csv"),
        ("mather", format!(r#"{{{EIKONAL}, "numerics": {{"n": 64}}}}"#), "mather.csv"),
        ("barrier", format!(r#"{{{EIKONAL}, "numerics": {{"n": 32}}}}"#), "barrier.csv"),
        ("corollary", r#"{"hamiltonian": {"builtin": "corollary_a", "params": {"a": "2 + sin(2*pi*x)", "V": "cos(2*pi*x)", "c": 1}}, "numerics": {"n": 64, "dt": 0.02}}"#.to_string(), "report.json"),
        ("homogenize", r#"{"H": "u + p^2 + 0.5*cos(2*pi*y)", "dHu": "1", "Lambda1": 1, "numerics": {"eps_list": [0.5, 0.25], "n_per_period": 8}}"#.to_string(), "rate.csv"),
    ];
    for (cmd, cfg, artifact) in cases {
        let sub = dir.path().join(cmd);
        fs::create_dir_all(&sub).unwrap();
        let o = weakkam(cmd, &cfg, &sub, &[]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
        assert!(sub.join("out").join(artifact).exists(), "{cmd}");
        assert!(!stdout(&o).is_empty());
    }
    let barrier = fs::read_to_string(dir.path().join("barrier/out/aubry.csv")).unwrap();
    assert!(barrier.lines().nth(2).unwrap().starts_with("0,"));
    let corollary = fs::read_to_string(dir.path().join("corollary/out/report.json")).unwrap();
    assert!(corollary.contains("\"verdict\": \"holds\""));
}

#[test]
fn quiet_suppresses_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, format!(r#"{{{EIKONAL}, "numerics": {{"n": 32}}}}"#)).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_weakkam"))
        .args(["mather", "--quiet", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}
