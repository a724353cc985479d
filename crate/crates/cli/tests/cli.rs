use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, config: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_dcflow"))
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    (output, out)
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = run(dir.path(), "{not json", &[]);
    assert_eq!(o.status.code(), Some(2));
    let (o, _) = run(dir.path(), r#"{"problem": {"name": "double_well", "q": [1]}, "experiment": "RunFlow", "x0": [1]}"#, &[]);
    assert_eq!(o.status.code(), Some(2), "missing schema_version");
    let (o, _) = run(
        dir.path(),
        r#"{"schema_version": 1, "problem": {"name": "double_well", "q": [1, 1]}, "experiment": "RunFlow", "x0": [1]}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(2), "x0 dimension mismatch");
}

#[test]
fn missing_config_file_exits_1() {
    let o = Command::new(env!("CARGO_BIN_EXE_dcflow")).args(["run", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eta_sweep_report() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run(
        dir.path(),
        r#"{"schema_version": 1, "problem": {"name": "quadratic", "a": [[2, 0], [0, 2]], "b": [[1, 0], [0, 1]]},
            "experiment": "EtaSweep", "x0": [1, 1], "scheme": {"max_iter": 80, "stop_grad_tol": 1e-7}}"#,
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["experiment"], "EtaSweep");
    assert_eq!(r["flags"]["q_eta_bound"]["passed"], true);
    assert_eq!(r["flags"]["eta_tradeoff"]["passed"], true);
    assert_eq!(r["results"]["q_eta_argmin"], 0.5);
    assert_eq!(r["results"]["constants"], "analytic");
    let csv = std::fs::read_to_string(out.join("eta_sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "eta,q_eta_bound,measured_ratio_geomean,max_step_ratio,predicted_local_factor,measured_local_factor"
    );
    // q_η = 1 − η(1−η)/2 for μ = 2, σ = ½, L_g = 2.
    for line in lines {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let eta = cells[0];
        assert!((cells[1] - (1.0 - 0.5 * eta * (1.0 - eta))).abs() < 1e-15);
        assert!((cells[2] - (1.0 - 0.5 * eta).powi(2)).abs() < 1e-6);
    }
}

#[test]
fn run_flow_leaves_the_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run(
        dir.path(),
        r#"{"schema_version": 1, "problem": {"name": "double_well", "q": [1, 4]}, "experiment": "RunFlow",
            "x0": [0.5, 0.5], "flow": {"t_end": 1.0, "record_stride": 0.1}}"#,
        &[],
    );
    assert!(o.status.success());
    let csv = std::fs::read_to_string(out.join("flow_000.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(header, ["t", "y_0", "y_1", "x_0", "x_1", "f", "metric_speed_sq", "energy_residual"]);
    let row: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    let t: f64 = row[0].parse().unwrap();
    let (x1, x2): (f64, f64) = (row[3].parse().unwrap(), row[4].parse().unwrap());
    assert!((t - 0.1).abs() < 1e-12);
    assert!((x1 - x2).abs() > 1e-3);
    assert_eq!(report(&out)["flags"]["flow_monotone"]["passed"], true);
}

#[test]
fn empirical_constants_do_not_certify() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"schema_version": 1, "problem": {"name": "double_well", "q": [1, 1]}, "experiment": "RateCertify",
        "x0": [1.05, 0.95], "x_star": [1, 1], "rate": {"c": 0.5}, "flow": {"t_end": 4.0}, "local": {"box_starts": 2}}"#;
    let (o, out) = run(dir.path(), config, &[]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(report(&out)["flags"]["metric_rate"]["passed"], false);
    let (o, out) = run(dir.path(), config, &["--report-only"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&out)["mode"], "report_only");
}

#[test]
fn strict_invariance_turns_warning_into_flag() {
    let dir = tempfile::tempdir().unwrap();
    let inside = r#"{"schema_version": 1, "problem": {"name": "double_well", "q": [1, 1]}, "experiment": "RunScheme",
        "x0": [1.9, -1.9], "scheme": {"eta": 1.0}}"#;
    let (o, out) = run(dir.path(), inside, &["--strict-invariance"]);
    assert!(o.status.success());
    assert_eq!(report(&out)["flags"]["region_invariance"]["passed"], true);

    let outside = inside.replace("[1.9, -1.9]", "[2.5, -1.9]");
    let (o, out) = run(dir.path(), &outside, &[]);
    assert!(o.status.success());
    let r = report(&out);
    assert!(r["flags"].get("region_invariance").is_none());
    assert_eq!(r["warnings"].as_array().unwrap().len(), 1);
    let (o, out) = run(dir.path(), &outside, &["--strict-invariance"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(report(&out)["flags"]["region_invariance"]["passed"], false);
}
