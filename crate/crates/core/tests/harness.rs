use std::path::Path;

use bierl::envs::{TaskConfig, TaskKind};
use bierl::error::Error;
use bierl::harness::{
    group_by_mode, plot_curves, run_csv_path, run_experiment, run_sweep, CurveGroup, RunConfig, SweepAxis,
    CSV_COLUMNS,
};
use bierl::run::Mode;

fn sphere_config(out: &Path, modes: Vec<Mode>) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.task = TaskConfig { kind: TaskKind::Sphere, ..cfg.task };
    cfg.modes = modes;
    cfg.output_dir = out.to_path_buf();
    cfg
}

#[test]
fn baseline_quickstart_sphere_converges() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_experiment(&sphere_config(dir.path(), vec![Mode::BaselineFixed])).unwrap();
    let base = s.mode(Mode::BaselineFixed).unwrap();
    assert_eq!(base.seeds, vec![1, 2, 3, 4, 5]);
    for seed in 1..=5 {
        assert!(run_csv_path(dir.path(), Mode::BaselineFixed, seed).exists());
    }
    assert!(base.final_mean > -0.25, "{}", base.final_mean);
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn npm_matches_or_beats_budget_matched_baseline_on_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_experiment(&sphere_config(dir.path(), vec![Mode::BaselineFixed, Mode::Npm])).unwrap();
    let (b, n) = (s.mode(Mode::BaselineFixed).unwrap(), s.mode(Mode::Npm).unwrap());
    assert!(b.total_evaluations[0] >= n.total_evaluations[0]);
    let wins = n.final_returns.iter().zip(&b.final_returns).filter(|(x, y)| x >= y).count();
    assert!(wins >= 4, "{wins}/5: {:?} vs {:?}", n.final_returns, b.final_returns);
}

#[test]
fn repeated_experiment_gives_identical_csvs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mk = |p: &Path| RunConfig {
        seeds: vec![4],
        total_iterations: 30,
        ..sphere_config(p, vec![Mode::BaselineFixed, Mode::Pm, Mode::Npm])
    };
    run_experiment(&mk(a.path())).unwrap();
    run_experiment(&mk(b.path())).unwrap();
    for mode in [Mode::BaselineFixed, Mode::Pm, Mode::Npm] {
        let read = |d: &Path| std::fs::read(run_csv_path(d, mode, 4)).unwrap();
        assert_eq!(read(a.path()), read(b.path()), "{mode}");
    }
}

/// Reads one numeric column with plain string handling, independent of the
/// harness's own CSV code.
fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn summary_agrees_with_recomputation_from_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        seeds: vec![1, 2, 3],
        total_iterations: 60,
        ..sphere_config(dir.path(), vec![Mode::BaselineFixed, Mode::Npm])
    };
    run_experiment(&cfg).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    for entry in summary["modes"].as_array().unwrap() {
        let mode = entry["mode"].as_str().unwrap();
        let mut finals = Vec::new();
        let mut aucs = Vec::new();
        for seed in [1, 2, 3] {
            let rets = column(&dir.path().join(format!("{mode}_seed{seed}.csv")), "return");
            assert_eq!(rets.len(), 60);
            finals.push(*rets.last().unwrap());
            aucs.push(rets.iter().sum::<f64>() / rets.len() as f64);
        }
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt())
        };
        let (fm, fs) = stats(&finals);
        let (am, as_) = stats(&aucs);
        let close = |key: &str, v: f64| {
            let got = entry[key].as_f64().unwrap();
            assert!((got - v).abs() <= 1e-12 * v.abs().max(1.0), "{mode} {key}: {got} vs {v}");
        };
        close("final_mean", fm);
        close("final_std", fs);
        close("auc_mean", am);
        close("auc_std", as_);
    }
}

#[test]
fn csv_schema_is_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { seeds: vec![1], total_iterations: 3, ..sphere_config(dir.path(), vec![Mode::Pm]) };
    run_experiment(&cfg).unwrap();
    let text = std::fs::read_to_string(run_csv_path(dir.path(), Mode::Pm, 1)).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
    let its = column(&run_csv_path(dir.path(), Mode::Pm, 1), "iteration");
    assert_eq!(its, vec![0.0, 1.0, 2.0]);
    assert!(dir.path().join("pm_seed1.timing.csv").exists());
}

#[test]
fn larger_population_reduces_spread_across_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sphere_config(dir.path(), vec![Mode::BaselineFixed]);
    let results = run_sweep(&cfg, SweepAxis::N, &[50.0, 20.0, 50.0]).unwrap();
    assert_eq!(results.iter().map(|(v, _)| *v).collect::<Vec<_>>(), vec![20.0, 50.0]);
    let std = |i: usize| results[i].1.mode(Mode::BaselineFixed).unwrap().final_std;
    assert!(std(1) < std(0), "n=50 std {} vs n=20 std {}", std(1), std(0));
    let table = std::fs::read_to_string(dir.path().join("sweep_n.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(dir.path().join("n_20").join("summary.json").exists());
}

#[test]
fn sweep_rejects_empty_or_bad_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sphere_config(dir.path(), vec![Mode::BaselineFixed]);
    assert!(matches!(run_sweep(&cfg, SweepAxis::M, &[]), Err(Error::Config(_))));
    assert!(matches!(run_sweep(&cfg, SweepAxis::K, &[0.0]), Err(Error::Config(_))));
    assert!(matches!(run_sweep(&cfg, SweepAxis::Omega, &[-1.0]), Err(Error::Config(_))));
}

fn two_seed_run(dir: &Path) -> RunConfig {
    let cfg = RunConfig { seeds: vec![1, 2], total_iterations: 12, ..sphere_config(dir, vec![Mode::BaselineFixed]) };
    run_experiment(&cfg).unwrap();
    cfg
}

fn points(svg: &str, class: &str) -> Vec<Vec<(f64, f64)>> {
    let doc = roxmltree::Document::parse(svg).unwrap();
    doc.descendants()
        .filter(|n| n.attribute("class") == Some(class))
        .map(|n| {
            n.attribute("points")
                .unwrap()
                .split(' ')
                .map(|p| {
                    let (x, y) = p.split_once(',').unwrap();
                    (x.parse().unwrap(), y.parse().unwrap())
                })
                .collect()
        })
        .collect()
}

fn band_collapses(svg: &str) {
    let band = &points(svg, "band")[0];
    let line = &points(svg, "mean")[0];
    let half = band.len() / 2;
    assert_eq!(half, line.len());
    for (t, p) in line.iter().enumerate() {
        assert_eq!(band[t], *p);
        assert_eq!(band[band.len() - 1 - t], *p);
    }
}

#[test]
fn single_run_plot_has_zero_width_band() {
    let dir = tempfile::tempdir().unwrap();
    two_seed_run(dir.path());
    let out = dir.path().join("one.svg");
    let group = CurveGroup { label: "baseline".into(), paths: vec![run_csv_path(dir.path(), Mode::BaselineFixed, 1)] };
    plot_curves(&[group], &out).unwrap();
    band_collapses(&std::fs::read_to_string(out).unwrap());
}

#[test]
fn identical_runs_plot_has_zero_width_band() {
    let dir = tempfile::tempdir().unwrap();
    two_seed_run(dir.path());
    let src = run_csv_path(dir.path(), Mode::BaselineFixed, 1);
    let copy = dir.path().join("copy_seed9.csv");
    std::fs::copy(&src, &copy).unwrap();
    let out = dir.path().join("dup.svg");
    plot_curves(&[CurveGroup { label: "dup".into(), paths: vec![src, copy] }], &out).unwrap();
    band_collapses(&std::fs::read_to_string(out).unwrap());
}

#[test]
fn plot_is_well_formed_xml_with_one_curve_per_mode() {
    let dir = tempfile::tempdir().unwrap();
    two_seed_run(dir.path());
    let paths: Vec<_> = [1, 2].iter().map(|&s| run_csv_path(dir.path(), Mode::BaselineFixed, s)).collect();
    let groups = group_by_mode(&paths);
    assert_eq!(groups.len(), 1);
    assert_eq!(groups[0].label, "baseline_fixed");
    let out = dir.path().join("plots/curves.svg");
    plot_curves(&groups, &out).unwrap();
    let svg = std::fs::read_to_string(out).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert_eq!(points(&svg, "mean").len(), 1);
}

#[test]
fn mismatched_grids_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = two_seed_run(dir.path());
    let short = RunConfig { output_dir: dir.path().join("short"), total_iterations: 5, ..cfg };
    run_experiment(&short).unwrap();
    let group = CurveGroup {
        label: "mixed".into(),
        paths: vec![
            run_csv_path(dir.path(), Mode::BaselineFixed, 1),
            run_csv_path(&short.output_dir, Mode::BaselineFixed, 1),
        ],
    };
    let err = plot_curves(&[group], &dir.path().join("x.svg")).unwrap_err();
    assert!(err.to_string().contains("iteration grid"), "{err}");
}

#[test]
fn failed_run_fails_the_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = sphere_config(dir.path(), vec![Mode::Pm]);
    cfg.seeds = vec![1];
    cfg.total_iterations = 2;
    // A meta model for another architecture cannot warm start this run.
    let mut other = cfg.clone();
    other.es.n = 12;
    let model = other.setup(Mode::Pm, 1).unwrap().fresh_meta();
    let path = dir.path().join("wrong.meta");
    bierl::persist::save_meta(&path, &model, bierl::persist::RngState { es_seed: 1, meta_seed: 1 }, other.snapshot())
        .unwrap();
    cfg.load_meta = Some(path);
    assert!(matches!(run_experiment(&cfg), Err(Error::Incompatible(_))));
}
