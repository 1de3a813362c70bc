use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use frontier_core::cli::{cmd_estimate, EstimateArgs};
use frontier_core::frontier::{Dataset, Orientation};
use frontier_core::io::write_csv;
use frontier_core::rng::substream;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_frontier"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/utility_like.csv")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Asserts the single machine-readable error line.
fn assert_error_line(o: &Output, kind: &str) {
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().filter(|l| l.starts_with("error")).collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with(&format!("error kind={kind} msg=")), "{err}");
}

#[test]
fn bandwidth_formula() {
    let o = run(&["bandwidth", "--w-hat", "1", "--rho0", "1", "--c-hat", "1", "--p", "1", "--n", "1000"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("rho0,tau_at_rho0,c_hat,b_hat,w_hat,h,scope"));
    let h: f64 = lines.next().unwrap().split(',').nth(5).unwrap().parse().unwrap();
    assert!((h - 0.1).abs() < 1e-12);
}

#[test]
fn tails_hand_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("res.csv");
    let e = std::f64::consts::E;
    std::fs::write(&p, format!("residual\n{}\n{}\n{}\n", e, e * e, e * e * e)).unwrap();
    let o = run(&["tails", "--residuals", p.to_str().unwrap(), "--r", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("n1,r,c_hat,b_hat"));
    let f: Vec<f64> = out.lines().nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(&f[..2], &[3.0, 2.0]);
    assert!((f[2] - 2.0 / 3.0).abs() < 1e-12);
    assert!((f[3] - (2.0 / 3.0) * (-2.0_f64).exp()).abs() < 1e-12);
}

#[test]
fn tails_with_tied_residuals_is_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("res.csv");
    std::fs::write(&p, "residual\n1\n1\n1\n").unwrap();
    let o = run(&["tails", "--residuals", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_error_line(&o, "degenerate_spacings");
}

#[test]
fn limits_tau_at_zero() {
    let o = run(&["limits", "--c", "1", "--b", "1", "--rho", "0", "--n-mc", "100000"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("rho,tau,status"));
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let tau: f64 = row[1].parse().unwrap();
    assert!((tau - 2.0).abs() < 0.06, "{tau}");
    assert_eq!(row[2], "ok");
}

#[test]
fn limits_dumps_q1_draws() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q1.csv");
    let o = run(&[
        "limits", "--c", "1", "--b", "1", "--curvature", "-1", "--rho", "0.5,2", "--n-mc", "200",
        "--q1-draws", "5", "--q1-output", q.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(q).unwrap();
    assert_eq!(text.lines().next(), Some("draw,rho,q1,status"));
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn estimate_on_fixture_has_34_rows_and_is_byte_stable() {
    let f = fixture();
    let args = ["estimate", "--orientation", "upper", "--seed", "7", "--data", f.to_str().unwrap()];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let out = stdout(&a);
    assert_eq!(out.lines().next(), Some("x,a_tilde,a_smooth,status,h_used"));
    assert_eq!(out.lines().count(), 35);
    assert!(stderr(&a).contains("seed: 7"));
}

#[test]
fn fixture_file_matches_generator() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    let o = run(&["fixture", "--output", p.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(p).unwrap(), std::fs::read(fixture()).unwrap());
}

#[test]
fn upper_orientation_matches_negated_lower() {
    let dir = tempfile::tempdir().unwrap();
    let data = frontier_core::io::load_csv(&fixture(), Orientation::Lower).unwrap();
    let x: Vec<f64> = (0..data.len()).map(|i| data.point(i)[0]).collect();
    let neg: Vec<f64> = (0..data.len()).map(|i| -data.response(i)).collect();
    let p = dir.path().join("neg.csv");
    write_csv(&Dataset::univariate(x, neg, Orientation::Lower).unwrap(), &p).unwrap();
    let common = ["--bandwidth-mode", "fixed", "--h", "1.0", "--grid-points", "10"];
    let up = run(&[&["estimate", "--orientation", "upper", "--data", fixture().to_str().unwrap()][..], &common].concat());
    let lo = run(&[&["estimate", "--orientation", "lower", "--data", p.to_str().unwrap()][..], &common].concat());
    assert!(up.status.success() && lo.status.success());
    for (a, b) in stdout(&up).lines().skip(1).zip(stdout(&lo).lines().skip(1)) {
        let a: Vec<&str> = a.split(',').collect();
        let b: Vec<&str> = b.split(',').collect();
        assert_eq!(a[0], b[0]);
        for k in [1, 2] {
            let (u, l): (f64, f64) = (a[k].parse().unwrap(), b[k].parse().unwrap());
            assert!((u + l).abs() < 1e-12, "{u} vs {l}");
        }
        assert_eq!(a[3], b[3]);
    }
}

#[test]
fn estimate_recovers_linear_frontier() {
    let mut rng = substream(11, 0);
    let n = 2000;
    let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&v| 1.0 + 2.0 * v + 0.5 * <Exp1 as Distribution<f64>>::sample(&Exp1, &mut rng))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("lin.csv");
    write_csv(&Dataset::univariate(x, y, Orientation::Lower).unwrap(), &p).unwrap();
    let rows = cmd_estimate(
        &EstimateArgs {
            data: Some(p),
            ..Default::default()
        },
        3,
    )
    .unwrap();
    assert_eq!(rows.len(), 34);
    for r in &rows[3..31] {
        let truth = 1.0 + 2.0 * r.x[0];
        assert!(r.is_bounded());
        assert!((r.a_tilde - truth).abs() < 0.1, "x {} a_tilde {} truth {truth}", r.x[0], r.a_tilde);
    }
}

#[test]
fn simulate_smoke_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = run(&["simulate", "--reps", "1", "--n", "200", "--n-mc", "100", "--output", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("100 MSE"));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().next(), Some("model,a0,c,n,mean_h,bias10,var100,mse100"));
    assert_eq!(text.lines().count(), 19);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "seed = 5\n[estimate]\norientation = \"upper\"\nbandwidth_mode = \"fixed\"\nh = 1.0\ngrid_points = 4\ndata = {:?}\n",
            fixture()
        ),
    )
    .unwrap();
    let o = run(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 5);
    assert!(stderr(&o).contains("seed: 5"));
    let o = run(&["estimate", "--config", cfg.to_str().unwrap(), "--grid-points", "6", "--seed", "9"]);
    assert_eq!(stdout(&o).lines().count(), 7);
    assert!(stderr(&o).contains("seed: 9"));
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[estimate]\ngrid_pts = 4\n").unwrap();
    let o = run(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_error_line(&o, "invalid_input");

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x1,y\n0.1,1.0\n0.2,abc\n").unwrap();
    let o = run(&["estimate", "--data", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_error_line(&o, "malformed_row");
    assert!(stderr(&o).contains('3'));

    let o = run(&["limits", "--c", "0", "--b", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_error_line(&o, "invalid_input");

    let o = run(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
    assert_error_line(&o, "usage");

    let o = run(&["estimate", "--data", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
