use std::path::Path;
use std::process::{Command, Output};

fn exe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_exterior-gs"))
}

fn run(out: &Path, args: &[&str]) -> Output {
    exe().arg("--out").arg(out).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_solution_with_all_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve", "-N", "3", "-p", "4", "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = read_json(&dir.path().join("solution_3_4_1_1.json"));
    for key in ["slope", "r_bar", "u_max", "mass", "action"] {
        assert!(v[key].as_f64().unwrap() > 0.0, "{key}");
    }
    let diag = v["diagnostics"].as_object().unwrap();
    for key in [
        "nehari_res",
        "pohozaev_full_res",
        "boundary_res_a18",
        "boundary_res_a20",
        "inequality_b9_slack",
        "action",
        "profile_distance",
    ] {
        assert!(diag[key].as_f64().unwrap().is_finite(), "{key}");
    }
    assert!(diag["nehari_res"].as_f64().unwrap() < 1e-6);
    assert!(diag["pohozaev_full_res"].as_f64().unwrap() < 1e-4);
    assert!(v["solution"]["grid"].as_array().unwrap().len() > 100);
}

#[test]
fn supercritical_exponent_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["solve", "-N", "3", "-p", "7"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("BadExponent"), "{}", stderr(&o));
}

#[test]
fn missing_lambda_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"schema_version": 1, "n": 3, "p": 4}"#).unwrap();
    let o = exe()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .arg("solve")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("missing required parameter `lambda`"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn config_rejects_unknown_fields_and_wrong_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"schema_version": 1, "n": 3, "p": 4, "lamda": 1}"#).unwrap();
    let o = exe().arg("--config").arg(&cfg).arg("solve").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown field"));

    std::fs::write(&cfg, r#"{"schema_version": 9, "n": 3, "p": 4, "lambda": 1}"#).unwrap();
    let o = exe().arg("--config").arg(&cfg).arg("solve").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_values_are_used_and_flags_override_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"schema_version": 1, "n": 3, "p": 4, "lambda": 1}"#).unwrap();
    let o = exe()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .args(["solve", "--lambda", "4"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("solution_3_4_4_1.json").exists());
}

#[test]
fn missing_config_file_is_an_io_error() {
    let o = exe()
        .args(["--config", "/nonexistent/cfg.json", "solve"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn curve_csv_is_deterministic_and_svg_marks_one_minimum() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "--jobs", "4", "curve", "-N", "3", "-p", "4", "--lmin", "1e-3", "--lmax", "1e3", "-n", "61", "--svg",
    ];
    let o = run(a.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(b.path(), &args[2..]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let csv_a = std::fs::read(a.path().join("curve_3_4_1.csv")).unwrap();
    let csv_b = std::fs::read(b.path().join("curve_3_4_1.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "serial and parallel refinement must agree byte for byte");
    assert!(!csv_a.contains(&b'\r'));

    let text = String::from_utf8(csv_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "lambda,d,slope,r_bar,action,nehari_res,pohozaev_res,stability_label"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 61);
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 8);
        for f in &fields[..7] {
            let mantissa = f.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.len(), 18, "17 significant digits: {f}");
        }
    }
    let labels: Vec<&str> = rows.iter().map(|r| r.rsplit(',').next().unwrap()).collect();
    assert_eq!(labels[0], "UNSTABLE");
    assert_eq!(labels[60], "STABLE");

    let svg = std::fs::read_to_string(a.path().join("curve_3_4_1.svg")).unwrap();
    assert_eq!(svg.matches("class=\"minimum\"").count(), 1);
    assert!(svg.contains("<polyline"));
    assert!(svg.contains("class=\"xtick\"") && svg.contains("class=\"ytick\""));
}

#[test]
fn cache_reuses_points_only_on_matching_key() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--cache", "curve", "-N", "3", "-p", "4", "--lmin", "0.1", "--lmax", "10", "-n", "9",
    ];
    let o = run(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let first = std::fs::read(dir.path().join("curve_3_4_1.csv")).unwrap();
    let cache_dir = dir.path().join("cache");
    let entries = || std::fs::read_dir(&cache_dir).unwrap().count();
    assert_eq!(entries(), 1);

    // Poison the stored points: a hit must surface the poisoned value.
    let cache_file = std::fs::read_dir(&cache_dir).unwrap().next().unwrap().unwrap().path();
    let mut stored = read_json(&cache_file);
    for (_, pt) in stored["points"].as_object_mut().unwrap() {
        pt["action"] = serde_json::json!(-1.0);
    }
    std::fs::write(&cache_file, stored.to_string()).unwrap();

    let o = run(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let second = std::fs::read_to_string(dir.path().join("curve_3_4_1.csv")).unwrap();
    assert!(second
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(4) == Some("-1.0000000000000000e0")));

    // Without the flag the cache is ignored.
    let o = run(dir.path(), &args[1..]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("curve_3_4_1.csv")).unwrap(), first);

    // Different tolerances hash to a different file and miss.
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"schema_version": 1, "tolerances": {"rel_tol": 5e-11}}"#).unwrap();
    let o = exe()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .args(args)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(entries(), 2);
    let third = std::fs::read_to_string(dir.path().join("curve_3_4_1.csv")).unwrap();
    assert!(!third.contains("-1.0000000000000000e0"));

    // A different radius misses too.
    let o = run(
        dir.path(),
        &[
            "--cache", "curve", "-N", "3", "-p", "4", "-R", "2", "--lmin", "0.1", "--lmax", "10", "-n", "9",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(entries(), 3);
    let fourth = std::fs::read_to_string(dir.path().join("curve_3_4_2.csv")).unwrap();
    assert!(!fourth.contains("-1.0000000000000000e0"));
}

#[test]
fn solver_failure_writes_partial_curve_and_annotation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"schema_version": 1, "tolerances": {"nehari_gate": 1e-30}}"#).unwrap();
    let o = exe()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .args(["curve", "-N", "3", "-p", "4", "-n", "10"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("SolveFailed"));
    let report = read_json(&dir.path().join("curve_3_4_1.failure.json"));
    assert_eq!(report["requested_points"], 10);
    assert!(report["message"].as_str().unwrap().contains("gates"));
    let partial = std::fs::read_to_string(dir.path().join("curve_3_4_1.partial.csv")).unwrap();
    assert!(partial.starts_with("lambda,d,slope"));
}

#[test]
fn threshold_in_the_subcritical_plane_is_zero_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["threshold", "-N", "2", "-p", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = read_json(&dir.path().join("threshold_2_3_1.json"));
    assert_eq!(v["eta"].as_f64(), Some(0.0));
    assert_eq!(v["kind"], "INF_AT_ZERO");
}

#[test]
fn mass_critical_scaling_gives_equal_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "--jobs",
            "3",
            "scaling",
            "-N",
            "3",
            "-p",
            "3.3333333333",
            "--radii",
            "0.5,1,2",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "json"))
        .unwrap();
    let v = read_json(&json);
    let etas: Vec<f64> = v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["eta"].as_f64().unwrap())
        .collect();
    assert_eq!(etas.len(), 3);
    assert!(etas[0] > 0.0);
    for e in &etas {
        assert!((e / etas[1] - 1.0).abs() < 0.01, "{etas:?}");
    }
}

#[test]
fn check_and_oracle_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["check", "-N", "2", "-p", "6", "--lambda", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = read_json(&dir.path().join("check_2_6_4_1.json"));
    assert_eq!(v["invariants_ok"], true);
    assert!(v["diagnostics"]["boundary_res_a20"].as_f64().unwrap() < 1e-4);
    assert!(v["reversed_slack"].as_f64().unwrap() > -1e-5);

    let o = run(dir.path(), &["compare-oracle", "-N", "3", "-p", "4", "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = read_json(&dir.path().join("compare_3_4_1_1.json"));
    assert!(v["comparison"]["rel_linf"].as_f64().unwrap() < 1e-4);
    let ratio = v["richardson"]["ratio"].as_f64().unwrap();
    assert!((3.5..=4.5).contains(&ratio), "{ratio}");
}

#[test]
fn stability_reports_a_single_label_change() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["stability", "-N", "3", "-p", "4", "-n", "31"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = read_json(&dir.path().join("stability_3_4_1.json"));
    assert_eq!(v["label_changes"], 1);
    let lmin = v["minimum_lambda"].as_f64().unwrap();
    assert!((0.1..1.0).contains(&lmin), "{lmin}");
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = run(&blocker.join("sub"), &["solve", "-N", "3", "-p", "4", "--lambda", "1"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}
