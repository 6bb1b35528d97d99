//! End-to-end runs of the command-line binary.

use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chaos-squeeze"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn simulate_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["simulate", "--tau-end", "0.003"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(text.starts_with("tau,x,p,psi,i_action,s_pp,s_xx,s_px,S,d,L_drift\n"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "g = 1.0\nomega = 2.0\n").unwrap();
    let out = run(dir.path(), &["chirikov", "--config", "run.toml", "--g", "2"]);
    assert_eq!(out.status.code(), Some(0));
    // kappa = 2 G / Omega^2 = 1 with the flag, 0.5 with the file value.
    assert!(stdout(&out).starts_with("kappa=1.000000e0 "), "{}", stdout(&out));

    std::fs::write(dir.path().join("bad.toml"), "gee = 1.0\n").unwrap();
    let out = run(dir.path(), &["simulate", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gee"));

    let out = run(dir.path(), &["simulate", "--config", "absent.toml"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn classify_and_lyapunov_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["classify", "--g", "0", "--p0", "0.5"]);
    assert!(stdout(&out).starts_with("class=R "));
    let out = run(dir.path(), &["classify", "--omega", "0.05"]);
    assert!(stdout(&out).starts_with("class=AC "));
    let out = run(dir.path(), &["lyapunov", "--tau-end", "50"]);
    assert_eq!(out.status.code(), Some(2), "horizon below 100 renormalizations");
    let out = run(dir.path(), &["lyapunov", "--out", "lam.txt"]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("lam.txt")).unwrap();
    let lambda: f64 = text.split_whitespace().next().unwrap().trim_start_matches("lambda=").parse().unwrap();
    assert!(lambda > 0.01);
}

#[test]
fn plots_are_written_next_to_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["simulate", "--g", "0.3", "--tau-end", "40", "--out", "run.csv", "--emit-plot"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["run.csv", "run.gp", "run.section.csv", "run.section.gp"] {
        assert!(dir.path().join(file).is_file(), "{file} missing");
    }
    let section = std::fs::read_to_string(dir.path().join("run.section.csv")).unwrap();
    assert!(section.starts_with("x,p\n"));
    // 40 / (2 pi / 0.5) covers three full periods plus the start.
    assert_eq!(section.lines().count(), 1 + 4);

    let out = run(dir.path(), &["intervals", "--g", "0.2", "--out", "iv.csv", "--emit-plot"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(std::fs::read_to_string(dir.path().join("iv.gp")).unwrap().contains("vectors nohead"));

    let out = run(dir.path(), &["simulate", "--emit-plot"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn omega_sweep_lenient_flags_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["sweep", "--axis", "omega", "--points", "3", "--window", "20", "--workers", "2", "--out", "s.csv"],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("2.0000000000000000e0,5.0000000000000003e-2,"));
    assert!(rows.iter().any(|r| r.ends_with(",radius")), "{text}");
    assert!(rows[0].contains(",AC,"));
}
