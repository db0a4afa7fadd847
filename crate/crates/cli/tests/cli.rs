use std::path::Path;
use std::process::{Command, Output};

fn bierl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bierl"))
        .args(args)
        .current_dir(cwd)
        .env("BIERL_WORKERS", "1")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: [&str; 8] = ["--set", "total_iterations=6", "--set", "es.n=8", "--set", "meta.m=4", "--set", "meta.k=3"];

#[test]
fn tiny_run_writes_csvs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--seeds", "1,2", "--mode", "baseline_fixed", "--mode", "pm", "--out", "out"];
    args.extend(TINY);
    let o = bierl(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    for name in ["baseline_fixed_seed1.csv", "baseline_fixed_seed2.csv", "pm_seed1.csv", "pm_seed2.csv", "summary.json"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let csv = std::fs::read_to_string(out.join("pm_seed1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn plot_subcommand_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--seeds", "1,2", "--mode", "baseline_fixed", "--out", "out"];
    args.extend(TINY);
    assert!(bierl(&args, dir.path()).status.success());
    let o = bierl(
        &["plot", "--out", "curves.svg", "out/baseline_fixed_seed1.csv", "out/baseline_fixed_seed2.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = std::fs::read_to_string(dir.path().join("curves.svg")).unwrap();
    assert!(svg.contains("<svg") && svg.trim_end().ends_with("</svg>"), "{svg}");
}

#[test]
fn pretrain_then_warm_start() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["pretrain", "--save-meta", "m.meta", "--iterations", "1"];
    args.extend(TINY);
    let o = bierl(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let mut args = vec!["run", "--seeds", "1", "--mode", "pm", "--load-meta", "m.meta", "--out", "warm"];
    args.extend(TINY);
    let o = bierl(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    // A different population size is a different architecture.
    let o = bierl(
        &["run", "--seeds", "1", "--mode", "pm", "--load-meta", "m.meta", "--set", "es.n=10", "--set", "meta.k=3"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "total_iterations = 5\n[es]\nlearning_rate = 0.1\n").unwrap();
    let o = bierl(&["run", "--config", "c.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));
}

#[test]
fn bad_override_and_bad_flag_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bierl(&["run", "--set", "es.n=abc"], dir.path()).status.code(), Some(1));
    assert_eq!(bierl(&["run", "--profile", "huge"], dir.path()).status.code(), Some(1));
    assert_eq!(bierl(&["fly"], dir.path()).status.code(), Some(1));
    assert_eq!(bierl(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn missing_config_file_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = bierl(&["run", "--config", "absent.toml"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn sweep_with_empty_values_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = bierl(&["sweep", "--axis", "n"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}
