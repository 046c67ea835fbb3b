use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn grwp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grwp"))
        .args(args)
        .output()
        .expect("run grwp")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// A small, fast 1D configuration.
fn small_config(dir: &Path, name: &str, patch: &str) -> PathBuf {
    let base = r#"{
      "particles": {"N": 1, "d": 1},
      "physics": {"lambda": 1.0, "sigma": 0.5},
      "grid": {"domain": [[-20.0, 20.0]], "points": [256]},
      "initial": {"mean": [0.0], "width": [1.0]},
      "run": {"mode": "grwp", "t_final": 1.0, "dt": 0.01, "ensemble_n": 40,
              "master_seed": 7, "snapshot_times": [0.5]}
    }"#;
    let mut v: serde_json::Value = serde_json::from_str(base).unwrap();
    let p: serde_json::Value = serde_json::from_str(patch).unwrap();
    merge(&mut v, &p);
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

fn merge(a: &mut serde_json::Value, b: &serde_json::Value) {
    match (a, b) {
        (serde_json::Value::Object(a), serde_json::Value::Object(b)) => {
            for (k, v) in b {
                merge(a.entry(k.clone()).or_insert(serde_json::Value::Null), v);
            }
        }
        (a, b) => *a = b.clone(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_bohm_only_writes_empty_log_and_snapshots() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "c.json", "{}");
    let out_dir = tmp.path().join("out");
    let out = grwp(&["simulate", "--config", s(&cfg), "--out", s(&out_dir), "--mode", "bohm_only"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_to_string(out_dir.join("events.jsonl")).unwrap(), "");
    assert_eq!(fs::read_to_string(out_dir.join("snapshots.jsonl")).unwrap().lines().count(), 40);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 7);
    assert_eq!(manifest["aborted"], 0);
    assert_eq!(manifest["config"]["run"]["mode"], "bohm_only");
}

#[test]
fn too_many_dimensions_is_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(
        tmp.path(),
        "c.json",
        r#"{"particles": {"N": 2, "d": 2}, "grid": {"domain": [[-4.0, 4.0]], "points": [8]}}"#,
    );
    let out = grwp(&["simulate", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert_eq!(err.trim().lines().count(), 1);
    assert!(err.contains("D=4 exceeds"), "{err}");
}

#[test]
fn rerun_with_same_seed_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "c.json", "{}");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&grwp(&["simulate", "--config", s(&cfg), "--out", s(&a)])), 0);
    assert_eq!(code(&grwp(&["simulate", "--config", s(&cfg), "--out", s(&b), "--workers", "3"])), 0);
    let la = fs::read(a.join("events.jsonl")).unwrap();
    assert!(!la.is_empty());
    assert_eq!(la, fs::read(b.join("events.jsonl")).unwrap());
    assert_eq!(fs::read(a.join("snapshots.jsonl")).unwrap(), fs::read(b.join("snapshots.jsonl")).unwrap());

    let c = tmp.path().join("c");
    assert_eq!(code(&grwp(&["simulate", "--config", s(&cfg), "--out", s(&c), "--seed", "8"])), 0);
    assert_ne!(la, fs::read(c.join("events.jsonl")).unwrap());
}

#[test]
fn rate_suite_rejects_zero_lambda() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "c.json", r#"{"physics": {"lambda": 0.0}}"#);
    let out = grwp(&["verify", "rate", "--config", s(&cfg)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("rate suite requires lambda > 0"), "{}", stderr(&out));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    assert_eq!(code(&grwp(&["verify", "everything"])), 2);
    assert_eq!(code(&grwp(&["frobnicate"])), 2);
}

#[test]
fn pinned_conditional_fails_and_expect_fail_inverts_it() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(
        tmp.path(),
        "c.json",
        r#"{"run": {"mode": "pinned", "ensemble_n": 300, "max_events": 2}}"#,
    );
    let plain = grwp(&["verify", "conditional", "--config", s(&cfg)]);
    assert_eq!(code(&plain), 1, "{}", stdout(&plain));
    assert!(stdout(&plain).contains("conditional.pinned.first"));
    assert!(stdout(&plain).contains("FAIL"));
    let expected = grwp(&["verify", "conditional", "--config", s(&cfg), "--expect-fail"]);
    assert_eq!(code(&expected), 0, "{}", stderr(&expected));
}

#[test]
fn verify_report_lines_are_written_to_out() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path(), "c.json", r#"{"run": {"ensemble_n": 200}}"#);
    let out_dir = tmp.path().join("v");
    let out = grwp(&["verify", "proximity", "--config", s(&cfg), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let report = fs::read_to_string(out_dir.join("report.txt")).unwrap();
    assert_eq!(report, stdout(&out));
    let line = report.lines().next().unwrap();
    assert!(line.starts_with("proximity.grwp.x0") && line.contains("PASS"), "{line}");
}

fn simulate_log(tmp: &Path, name: &str, patch: &str) -> PathBuf {
    let cfg = small_config(tmp, &format!("{name}.json"), patch);
    let dir = tmp.join(name);
    let out = grwp(&["simulate", "--config", s(&cfg), "--out", s(&dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    dir
}

#[test]
fn compare_log_with_itself_gives_zero_statistic() {
    let tmp = TempDir::new().unwrap();
    let dir = simulate_log(tmp.path(), "a", r#"{"run": {"ensemble_n": 60}}"#);
    let log = dir.join("events.jsonl");
    for functional in ["centers", "intervals"] {
        let out = grwp(&["compare", s(&log), s(&log), "--functional", functional]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        for line in stdout(&out).lines() {
            assert!(line.contains("stat=0.000000e0"), "{line}");
        }
    }
}

#[test]
fn compare_rejects_mismatched_dimension_and_bad_lines() {
    let tmp = TempDir::new().unwrap();
    let one = simulate_log(tmp.path(), "one", r#"{"run": {"ensemble_n": 20}}"#).join("events.jsonl");
    let two = simulate_log(
        tmp.path(),
        "two",
        r#"{"particles": {"d": 2}, "grid": {"domain": [[-8.0, 8.0]], "points": [32]},
            "physics": {"sigma": 1.0}, "run": {"ensemble_n": 20, "dt": 0.02}}"#,
    )
    .join("events.jsonl");
    let out = grwp(&["compare", s(&one), s(&two)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("dimensions differ"), "{}", stderr(&out));

    let bad = tmp.path().join("bad.jsonl");
    let mut text = fs::read_to_string(&one).unwrap();
    text.push_str("{\"traj\": oops}\n");
    let bad_line = text.lines().count();
    fs::write(&bad, text).unwrap();
    let out = grwp(&["compare", s(&one), s(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains(&format!("line {bad_line}")), "{}", stderr(&out));
}

#[test]
fn plot_data_exports() {
    let tmp = TempDir::new().unwrap();
    let dir = simulate_log(tmp.path(), "p", r#"{"run": {"ensemble_n": 100, "snapshot_times": [0.25, 0.5, 0.75]}}"#);
    let log = dir.join("events.jsonl");
    let events = fs::read_to_string(&log).unwrap().lines().count();

    let out = grwp(&["plot-data", s(&log), "--kind", "histogram", "--bins", "64"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "bin_edge_low,bin_edge_high,count");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 64);
    let total: usize = rows.iter().map(|r| r.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, events);

    let out = grwp(&["plot-data", s(&log), "--kind", "cdf"]);
    let text = stdout(&out);
    let f: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(f.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*f.last().unwrap(), 1.0);

    let csv = tmp.path().join("traj.csv");
    let out = grwp(&[
        "plot-data",
        s(&dir.join("snapshots.jsonl")),
        "--kind",
        "trajectory",
        "--traj",
        "3",
        "--out",
        s(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,q1");
    let t: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(t, vec![0.25, 0.5, 0.75]);

    let empty = tmp.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    assert_eq!(code(&grwp(&["plot-data", s(&empty), "--kind", "cdf"])), 2);
}

#[test]
fn propagator_test_passes_on_canonical_grid() {
    let out = grwp(&["propagator-test"]);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 2);
}
