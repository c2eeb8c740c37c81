//! Black-box tests of the circpat binary: exit codes and output layout.

use std::path::Path;
use std::process::Command;

fn circpat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_circpat"))
}

fn write_inputs(dir: &Path) {
    std::fs::write(
        dir.join("config.txt"),
        "R=0.4\nr_det=0.8\nH=3.0\nT=3.2\nN_sigma=4\nN_z=32\nN_t=64\nN_r=12\nn_alpha=32\n\
         method=sine\nnx=12\nny=12\nphantom=phantom.txt\nout=out\n",
    )
    .unwrap();
    std::fs::write(dir.join("phantom.txt"), "0.1 0.0 1.5 0.1 1.0 smooth\n").unwrap();
}

#[test]
fn simulate_then_reconstruct_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    let out = circpat()
        .current_dir(dir.path())
        .args(["simulate", "--config", "config.txt"])
        .output()
        .unwrap();
    assert!(out.status.success(), "simulate failed: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Enclosing"), "verdict not echoed: {stdout}");

    let out = circpat()
        .current_dir(dir.path())
        .args(["reconstruct", "--config", "config.txt"])
        .output()
        .unwrap();
    assert!(out.status.success(), "reconstruct failed: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/volume.bin").exists());
    assert!(dir.path().join("out/metrics.txt").exists());
    let metrics = std::fs::read_to_string(dir.path().join("out/metrics.txt")).unwrap();
    assert!(metrics.contains("relative_l2="));
    assert!(metrics.contains("volume_relative_l2="));

    // metrics subcommand on two grid files
    let out = circpat()
        .current_dir(dir.path())
        .args(["metrics", "out/means_recon.bin", "out/means_exact.bin"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("rmse="));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    std::fs::write(dir.path().join("config.txt"), "R=0.4\nbogus_key=1\n").unwrap();
    let out = circpat()
        .current_dir(dir.path())
        .args(["simulate", "--config", "config.txt"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn numerical_refusal_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    // invalid geometry band: r_det between R and 2R
    let out = circpat()
        .current_dir(dir.path())
        .args(["simulate", "--config", "config.txt"])
        .env("CIRCPAT_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    // reconstruct with a method the geometry does not admit
    let out = circpat()
        .current_dir(dir.path())
        .args(["reconstruct", "--config", "config.txt", "--method", "point"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn benchmark_single_step_reports_not_applicable() {
    let out = circpat().args(["benchmark", "--base-n", "16", "--steps", "1"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("not-applicable"));
}
