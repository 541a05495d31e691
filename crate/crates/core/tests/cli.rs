use std::path::Path;
use std::process::{Command, Output};

fn rtg(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtg")).args(args).arg("--out").arg(out).output().unwrap()
}

fn error_json(o: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&o.stderr);
    let line = stderr.lines().last().expect("error line");
    serde_json::from_str(line).expect("machine-readable error")
}

#[test]
fn limits_row_for_degree_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = rtg(&["limits", "--fitness.family", "exponential"], dir.path());
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("limits.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("d,finite_n_pmf,limit_pmf,fujihara_approx,error_bound"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "0");
    let limit: f64 = row[2].parse().unwrap();
    assert!((limit - 0.1485).abs() < 5e-4);
    assert_eq!(csv.lines().count(), 22);
}

#[test]
fn config_file_and_range_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "fitness.family = exponential\nrun.n = -5\nrun.bogus = 1\n").unwrap();
    let o = rtg(&["limits", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let e = error_json(&o);
    assert_eq!(e["error"], "config_error");
    let details: Vec<String> = serde_json::from_value(e["details"].clone()).unwrap();
    assert!(details.iter().any(|m| m.contains("line 2") && m.contains("run.n")));
    assert!(details.iter().any(|m| m.contains("line 3") && m.contains("unknown key")));

    let o = rtg(&["limits"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(error_json(&o)["message"].as_str().unwrap().contains("fitness.family"));
}

#[test]
fn resource_refusal_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = rtg(
        &["simulate", "--fitness.family", "exponential", "--run.n", "1000", "--run.max_total_nodes", "10"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_json(&o)["error"], "resource_refused");
}

#[test]
fn charfn_beyond_series_cap_is_numerical() {
    let dir = tempfile::tempdir().unwrap();
    let o = rtg(&["charfn", "--fitness.family", "pareto", "--charfn.t_grid", "40"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&o)["error"], "numerical_failure");
}

#[test]
fn simulate_is_reproducible_and_echoes_config() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--fitness.family", "exponential", "--run.n", "2000", "--run.replications", "10"];
    let mut first = args.to_vec();
    first.extend(["--threads", "1"]);
    let mut second = args.to_vec();
    second.extend(["--threads", "3"]);
    assert!(rtg(&first, a.path()).status.success());
    assert!(rtg(&second, b.path()).status.success());
    let ra = std::fs::read(a.path().join("replications.csv")).unwrap();
    let rb = std::fs::read(b.path().join("replications.csv")).unwrap();
    assert_eq!(ra, rb);
    assert!(ra.starts_with(b"run,d,fraction\n"));

    let s: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["config"]["run"]["n"], 2000);
    assert_eq!(s["config"]["gates"]["ks"], 0.25);
    assert_eq!(s["config"]["run"]["seed"], 1);
    assert_eq!(s["degrees"].as_array().unwrap().len(), 3);
}

#[test]
fn floats_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = rtg(&["joint-moments", "--fitness.family", "exponential", "--run.d_set", "0"], dir.path());
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("joint_moments.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let m: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(rtg_core::cli::num(m).parse::<f64>().unwrap().to_bits(), m.to_bits());
        assert!(line.contains(",quadrature,"));
    }
}

#[test]
fn verify_passes_for_both_families() {
    for family in ["exponential", "pareto"] {
        let dir = tempfile::tempdir().unwrap();
        let o = rtg(&["verify", "--fitness.family", family, "--mc.samples", "100000"], dir.path());
        assert!(o.status.success(), "{family}: {}", String::from_utf8_lossy(&o.stderr));
        let csv = std::fs::read_to_string(dir.path().join("verify.csv")).unwrap();
        assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("true")));
    }
}
