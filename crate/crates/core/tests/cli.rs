use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_difftrace"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("DIFFTRACE_THREADS", "2").output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_obs(path: &Path, rows: &[[f64; 3]]) {
    let body: String = rows
        .iter()
        .map(|r| format!("{},{},{}\n", r[0], r[1], r[2]))
        .collect();
    fs::write(path, format!("a,b,c\n{body}")).unwrap();
}

const ROWS_X: [[f64; 3]; 5] = [
    [1.0, 0.2, -0.3],
    [0.4, -1.1, 0.9],
    [-0.7, 0.5, 0.1],
    [1.3, 0.8, -1.2],
    [-0.2, -0.6, 0.4],
];
const ROWS_Y: [[f64; 3]; 5] = [
    [0.3, 1.4, -0.8],
    [-1.2, 0.1, 0.6],
    [0.9, -0.4, 0.2],
    [0.1, 0.7, -1.5],
    [-0.6, -1.0, 1.1],
];

#[test]
fn estimate_identical_groups_gives_zero() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.csv");
    write_obs(&x, &ROWS_X);
    let out = dir.path().join("out");
    let o = run(&["estimate", "--x", p(&x), "--y", p(&x), "--lambda", "0.01", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let delta = fs::read_to_string(out.join("delta.csv")).unwrap();
    assert!(delta.split([',', '\n']).filter(|s| !s.is_empty()).all(|v| v.parse::<f64>().unwrap() == 0.0));
    assert_eq!(fs::read_to_string(out.join("support.csv")).unwrap(), "i,j,value\n");
    let run: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["nnz"], 0);
    assert_eq!(run["converged"], true);
}

#[test]
fn estimate_by_bic_writes_path() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = (dir.path().join("x.csv"), dir.path().join("y.csv"));
    write_obs(&x, &ROWS_X);
    write_obs(&y, &ROWS_Y);
    let out = dir.path().join("out");
    let o = run(&[
        "estimate", "--x", p(&x), "--y", p(&y), "--bic", "max", "--grid-count", "10", "--tol", "1e-8",
        "--max-iter", "100000", "--out", p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let path = fs::read_to_string(out.join("path.csv")).unwrap();
    assert_eq!(path.lines().count(), 11);
    assert!(path.starts_with("lambda,nnz,bic_f,bic_inf,converged,iterations\n"));
    let run: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["selection"], "bic-max");
}

#[test]
fn ragged_input_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.csv");
    fs::write(&x, "1,2,3\n4,5\n6,7,8\n").unwrap();
    let o = run(&["estimate", "--x", p(&x), "--y", p(&x), "--lambda", "0.1", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(":2:") && err.contains("expected 3 fields"), "{err}");
}

#[test]
fn non_convergence_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = (dir.path().join("x.csv"), dir.path().join("y.csv"));
    write_obs(&x, &ROWS_X);
    write_obs(&y, &ROWS_Y);
    let o = run(&[
        "estimate", "--x", p(&x), "--y", p(&y), "--lambda", "0.001", "--max-iter", "1", "--tol", "1e-12",
        "--out", p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(dir.path().join("delta.csv").exists());
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&[
            "simulate", "--scenario", "sim1", "--p", "12", "--n", "80", "--reps", "3", "--seed", "7",
            "--grid-count", "12", "--export-data", "--out", p(out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "replicates.csv", "summary.csv", "curve_dtl.csv", "curve_naive.csv", "data/x.csv", "data/y.csv",
        "data/omega_x.csv", "data/omega_y.csv", "data/delta_star.csv", "data/truth_support.csv",
    ] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let x = fs::read_to_string(a.join("data/x.csv")).unwrap();
    assert_eq!(x.lines().count(), 80);
    assert_eq!(fs::read_to_string(a.join("replicates.csv")).unwrap().lines().count(), 4);
    assert!(fs::read_to_string(a.join("curve_dtl.csv")).unwrap().starts_with("lambda,tp,fp,precision\n"));
}

#[test]
fn simulate_single_replicate_leaves_sd_empty() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate", "--scenario", "sim2", "--p", "50", "--n", "60", "--grid-count", "6", "--out", p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let tp = summary.lines().find(|l| l.starts_with("tp_f,")).unwrap();
    let fields: Vec<&str> = tp.split(',').collect();
    assert_eq!(fields.len(), 4);
    assert!(fields[2].is_empty());
}

#[test]
fn evaluate_then_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("est.csv"), "0,1\n1,0\n").unwrap();
    fs::write(d.join("truth.csv"), "0,2\n-1,0\n").unwrap();
    let o = run(&["evaluate", "--estimate", p(&d.join("est.csv")), "--truth", p(&d.join("truth.csv")), "--out", p(d)]);
    assert_eq!(o.status.code(), Some(0));
    let m = fs::read_to_string(d.join("metrics.csv")).unwrap();
    assert_eq!(m, "tp,tn,td,sign_consistent,nnz_est,nnz_true\n1,1,1,false,2,2\n");

    fs::write(d.join("ox.csv"), "1,0,0\n0,1,0\n0,0,1\n").unwrap();
    fs::write(d.join("s.csv"), "i,j\n1,2\n2,1\n").unwrap();
    let o = run(&[
        "diagnose", "--x", p(&d.join("ox.csv")), "--y", p(&d.join("ox.csv")), "--support", p(&d.join("s.csv")),
        "--out", p(d),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("diagnose.json")).unwrap()).unwrap();
    assert_eq!(j["alpha"], 1.0);
    assert_eq!(j["kappa"], 1.0);
    assert_eq!(j["holds"], true);
}

#[test]
fn diagnose_refuses_large_p() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p41: String = (0..41)
        .map(|i| (0..41).map(|j| if i == j { "1" } else { "0" }).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(d.join("o.csv"), p41).unwrap();
    fs::write(d.join("s.csv"), "1,2\n").unwrap();
    let o = run(&[
        "diagnose", "--x", p(&d.join("o.csv")), "--y", p(&d.join("o.csv")), "--support", p(&d.join("s.csv")),
        "--out", p(d),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("O(p^4)"));
}
