use std::path::Path;
use std::process::{Command, Output};

fn torusq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torusq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_writes_reports_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h");
    let o = torusq(&["verify", "heisenberg", "--n", "2", "--hermite-D", "20", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["suite"], "heisenberg");
    assert_eq!(report["pass"], true);
    assert_eq!(report["config"]["N"], 2);
    assert_eq!(report["config"]["D"], 20);
    let csv = std::fs::read_to_string(out.join("residuals.csv")).unwrap();
    assert!(csv.starts_with("check,value,tolerance,pass\n"));
    assert_eq!(csv.lines().count(), 4);
    assert!(out.join("heisenberg_x.csv").exists());
    let side = read_json(&out.join("heisenberg_x.json"));
    assert_eq!(side["N"], 2);
}

#[test]
fn same_config_gives_identical_report() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for p in [&a, &b] {
        let o = torusq(&["verify", "zak", "--hermite-D", "16", "--grid", "48x48", "--seed", "5", "--out", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    }
    let ra = std::fs::read_to_string(a.join("report.json")).unwrap();
    let rb = std::fs::read_to_string(b.join("report.json")).unwrap();
    let ra = ra.replace(a.to_str().unwrap(), "OUT");
    let rb = rb.replace(b.to_str().unwrap(), "OUT");
    assert_eq!(ra, rb);
    assert_eq!(
        std::fs::read(a.join("residuals.csv")).unwrap(),
        std::fs::read(b.join("residuals.csv")).unwrap()
    );
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["verify", "heisenberg", "--n", "0", "--out", out],
        vec!["verify", "heisenberg", "--grid", "12by12", "--out", out],
        vec!["verify", "heisenberg", "--quad", "10", "--out", out],
        vec!["verify", "heisenberg", "--window", "0", "--out", out],
        vec!["verify", "nonsense", "--out", out],
        vec!["verify"],
        vec!["commutant", "--set", "XYZ"],
    ] {
        let o = torusq(&args);
        assert_eq!(code(&o), 2, "{args:?}");
    }
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"N": 1, "colour": "red"}"#).unwrap();
    let o = torusq(&["verify", "heisenberg", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 2);
}

#[test]
fn failing_suite_exits_one_and_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.json");
    std::fs::write(&cfg, r#"{"D": 24, "thresholds": {"heisenberg": 0.0}, "N": 3}"#).unwrap();
    let out = dir.path().join("o");
    let o = torusq(&["verify", "heisenberg", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["pass"], false);
    assert_eq!(report["config"]["thresholds"]["heisenberg"], 0.0);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"N": 2, "D": 40}"#).unwrap();
    let out = dir.path().join("o");
    let o = torusq(&[
        "verify",
        "heisenberg",
        "--config",
        cfg.to_str().unwrap(),
        "--hermite-D",
        "12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["config"]["N"], 2);
    assert_eq!(report["config"]["D"], 12);
    assert_eq!(report["config"]["margin"], 6);
}

#[test]
fn commutant_command_reports_profile() {
    let dir = tempfile::tempdir().unwrap();
    let o = torusq(&["commutant", "--set", "FN", "--n", "1", "--d-list", "8,12", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("commutant.json"));
    for key in ["task", "N", "D", "set", "singular_values", "estimated_dim", "gap_ratio", "threshold", "confident"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert_eq!(r["D"], serde_json::json!([8, 12]));
    assert_eq!(r["estimated_dim"], serde_json::json!([1, 1]));
    assert_eq!(r["singular_values"][0].as_array().unwrap().len(), 8);
}

#[test]
fn commutant_custom_sets() {
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("set.txt");
    // a single observable commutes with its own functional calculus
    std::fs::write(&set, "# cos 2 pi x\n1 0 0.5 0\n-1 0 0.5 0\n").unwrap();
    let arg = format!("custom:{}", set.display());
    let o = torusq(&["commutant", "--set", &arg, "--d-list", "8"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["estimated_dim"][0].as_u64().unwrap() > 1);

    std::fs::write(&set, "1 0 1 0\n1 0 2 0\n").unwrap();
    assert_eq!(code(&torusq(&["commutant", "--set", &arg, "--d-list", "8"])), 2);
    let missing = format!("custom:{}", dir.path().join("nope.txt").display());
    assert_eq!(code(&torusq(&["commutant", "--set", &missing, "--d-list", "8"])), 2);
}
