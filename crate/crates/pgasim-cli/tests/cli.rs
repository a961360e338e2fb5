//! End-to-end checks of the benchmark binary.

use std::process::Command;

use pgasim::bench::BenchReport;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pgasim"))
}

fn tiny_args() -> Vec<&'static str> {
    vec![
        "--scale", "5", "--edgefactor", "8", "--seed", "7", "--ranks", "1,2", "--roots", "2",
    ]
}

#[test]
fn tiny_sweep_validates_and_emits_json() {
    let out = bin().args(tiny_args()).output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = BenchReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    // 2 rank counts x 2 modes x 2 roots
    assert_eq!(report.runs.len(), 8);
    assert!(report.runs.iter().all(|r| r.validated));
}

#[test]
fn csv_output_has_the_expected_header() {
    let out = bin().args(tiny_args()).args(["--output", "csv"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("mode,ranks,root,edges_traversed,"));
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn bad_mode_is_a_config_error() {
    let out = bin().args(["--mode", "sideways"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_flag_is_a_config_error() {
    let out = bin().args(["--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn zero_roots_is_a_config_error() {
    let out = bin().args(["--roots", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--scale"));
}

#[test]
fn dumped_edges_reload_into_the_same_report() {
    let path =
        std::env::temp_dir().join(format!("pgasim-cli-edges-{}.txt", std::process::id()));

    let dumped = bin()
        .args(tiny_args())
        .args(["--dump-edges", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(dumped.status.success());

    let loaded = bin()
        .args(tiny_args())
        .args(["--load-edges", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(loaded.status.success());
    std::fs::remove_file(&path).ok();

    let a = BenchReport::from_json(&String::from_utf8(dumped.stdout).unwrap()).unwrap();
    let b = BenchReport::from_json(&String::from_utf8(loaded.stdout).unwrap()).unwrap();
    assert_eq!(a.without_timing(), b.without_timing());
}
