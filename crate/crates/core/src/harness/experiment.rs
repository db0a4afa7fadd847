use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::envs::{Task, TaskConfig, TaskKind};
use crate::error::{Error, Result};
use crate::nn::MetaModel;
use crate::persist::{load_checkpoint, load_meta, save_checkpoint, save_meta, Checkpoint, RngState};
use crate::record::RunRecord;
use crate::run::{Mode, Run, RunSetup};

/// Column order of run CSVs.
pub const CSV_COLUMNS: [&str; 9] =
    ["iteration", "return", "pop_mean", "pop_max", "sigma", "alpha", "inner_evals", "lookahead_evals", "seed"];

pub fn run_csv_path(dir: &Path, mode: Mode, seed: u64) -> PathBuf {
    dir.join(format!("{mode}_seed{seed}.csv"))
}

pub fn timing_csv_path(dir: &Path, mode: Mode, seed: u64) -> PathBuf {
    dir.join(format!("{mode}_seed{seed}.timing.csv"))
}

pub fn checkpoint_path(dir: &Path, mode: Mode, seed: u64) -> PathBuf {
    dir.join(format!("{mode}_seed{seed}.ckpt"))
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    if records.is_empty() {
        w.write_record(CSV_COLUMNS).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(CSV_COLUMNS) {
        return Err(Error::format(path, format!("unexpected columns {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

fn write_timing(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["iteration", "wall_ms"]).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.write_record([r.iteration.to_string(), r.wall_ms.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

/// Iterations a run needs to recover after each optimum shift.
///
/// For a shift at iteration `s` with pre-shift return `p = ret[s-1]` and drop
/// `d = p - ret[s]`, recovery is the smallest `r` with
/// `ret[s+r] >= p - 0.1 d`, searched up to the next shift. Runs that do not
/// recover in time count the full phase length; shifts without a drop count
/// zero.
pub fn recovery_iterations(returns: &[f64], shift_every: u64) -> Vec<u64> {
    let every = shift_every as usize;
    if every == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut s = every;
    while s < returns.len() {
        let end = (s + every).min(returns.len());
        let pre = returns[s - 1];
        let drop = pre - returns[s];
        let r = if drop <= 0.0 {
            0
        } else {
            let threshold = pre - 0.1 * drop;
            (s..end).position(|t| returns[t] >= threshold).unwrap_or(end - s)
        };
        out.push(r as u64);
        s += every;
    }
    out
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Summary of one mode across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub population: usize,
    pub seeds: Vec<u64>,
    /// `return` of each run's last row.
    pub final_returns: Vec<f64>,
    pub final_mean: f64,
    pub final_std: f64,
    /// Mean of `return` over all rows of each run.
    pub auc: Vec<f64>,
    pub auc_mean: f64,
    pub auc_std: f64,
    /// Inner plus lookahead evaluations of each run.
    pub total_evaluations: Vec<u64>,
    /// Recovery times after every shift of every seed (nonstationary tasks).
    pub recovery: Vec<u64>,
    pub recovery_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub total_iterations: u64,
    pub modes: Vec<ModeSummary>,
    pub config: serde_json::Value,
}

impl ExperimentSummary {
    pub fn mode(&self, mode: Mode) -> Option<&ModeSummary> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

/// Records and final state of one (mode, seed) run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub mode: Mode,
    pub seed: u64,
    pub population: usize,
    pub records: Vec<RunRecord>,
    pub meta: Option<MetaModel>,
}

/// Executes one run, writing its CSVs (and checkpoints) under `cfg.output_dir`.
pub fn execute_run(cfg: &RunConfig, mode: Mode, seed: u64, warm: Option<&MetaModel>) -> Result<RunOutcome> {
    let dir = &cfg.output_dir;
    let setup = cfg.setup(mode, seed)?;
    let task = Task::new(cfg.task_for(seed), setup.es.gamma)?;
    if let Some(w) = warm {
        if w.spec_hash() != setup.meta_spec_hash() {
            return Err(Error::Incompatible("warm-start meta model does not fit this run".into()));
        }
    }
    let csv_path = run_csv_path(dir, mode, seed);
    let ckpt_path = checkpoint_path(dir, mode, seed);

    let (mut run, mut records) = if cfg.resume && ckpt_path.exists() {
        let state = load_checkpoint(&ckpt_path)?.run_state(&setup)?;
        let mut kept = read_records(&csv_path)?;
        kept.retain(|r| r.iteration < state.iteration);
        if kept.len() as u64 != state.iteration {
            return Err(Error::State(format!(
                "{} holds {} rows but the checkpoint is at iteration {}",
                csv_path.display(),
                kept.len(),
                state.iteration
            )));
        }
        info!("{mode} seed {seed}: resuming at iteration {}", state.iteration);
        (Run::resume(setup.clone(), &task, state)?, kept)
    } else {
        let theta0 = task.initial_params(seed);
        let meta0 = if mode == Mode::Pm { warm.cloned() } else { None };
        (Run::new(setup.clone(), &task, theta0, meta0)?, Vec::new())
    };

    let snapshot = cfg.snapshot();
    let every = cfg.checkpoint_every;
    run.run_until(cfg.total_iterations, |record, run| {
        records.push(record.clone());
        if every > 0 && (record.iteration + 1) % every == 0 {
            write_records(&csv_path, &records)?;
            save_checkpoint(&ckpt_path, &Checkpoint::for_run(run.setup(), run.state(), snapshot.clone()))?;
        }
        Ok(())
    })?;
    write_records(&csv_path, &records)?;
    write_timing(&timing_csv_path(dir, mode, seed), &records)?;
    let state = run.into_state();
    Ok(RunOutcome { mode, seed, population: setup.es.n, records, meta: state.meta })
}

fn summarize(cfg: &RunConfig, mode: Mode, outcomes: &[&RunOutcome]) -> ModeSummary {
    let finals: Vec<f64> = outcomes.iter().map(|o| o.records.last().map_or(f64::NAN, |r| r.ret)).collect();
    let auc: Vec<f64> = outcomes
        .iter()
        .map(|o| o.records.iter().map(|r| r.ret).sum::<f64>() / o.records.len().max(1) as f64)
        .collect();
    let totals = outcomes
        .iter()
        .map(|o| o.records.last().map_or(0, |r| r.inner_evals + r.lookahead_evals))
        .collect();
    let recovery: Vec<u64> = match cfg.task.kind {
        TaskKind::ShiftedSphereNonstationary => outcomes
            .iter()
            .flat_map(|o| {
                let rets: Vec<f64> = o.records.iter().map(|r| r.ret).collect();
                recovery_iterations(&rets, cfg.task.shift_every)
            })
            .collect(),
        _ => Vec::new(),
    };
    let (final_mean, final_std) = mean_std(&finals);
    let (auc_mean, auc_std) = mean_std(&auc);
    ModeSummary {
        mode,
        population: outcomes.first().map_or(cfg.es.n, |o| o.population),
        seeds: outcomes.iter().map(|o| o.seed).collect(),
        final_returns: finals,
        final_mean,
        final_std,
        auc,
        auc_mean,
        auc_std,
        total_evaluations: totals,
        recovery_median: median(&recovery.iter().map(|&r| r as f64).collect::<Vec<_>>()),
        recovery,
    }
}

/// Path a PM run's meta model is saved to: `base` itself for a single seed,
/// otherwise with a `.seed<s>` suffix.
pub fn meta_save_path(base: &Path, seed: u64, seeds: usize) -> PathBuf {
    if seeds == 1 {
        return base.to_path_buf();
    }
    let mut name = base.as_os_str().to_owned();
    name.push(format!(".seed{seed}"));
    PathBuf::from(name)
}

/// Runs every (mode, seed) pair concurrently and writes per-run CSVs plus
/// `summary.json` to the output directory.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut modes = cfg.modes.clone();
    modes.sort();
    modes.dedup();
    let mut seen = std::collections::HashSet::new();
    let seeds: Vec<u64> = cfg.seeds.iter().copied().filter(|s| seen.insert(*s)).collect();
    if seeds.len() != cfg.seeds.len() {
        warn!("duplicate seeds dropped");
    }
    if modes.contains(&Mode::BaselineFixed) && cfg.baseline_population() != cfg.es.n {
        info!(
            "baseline population raised from {} to {} to match the adaptive evaluation budget",
            cfg.es.n,
            cfg.baseline_population()
        );
    }

    let warm = match (&cfg.load_meta, modes.contains(&Mode::Pm)) {
        (Some(p), true) => Some(load_meta(p, &cfg.setup(Mode::Pm, seeds[0])?)?),
        _ => None,
    };

    let jobs: Vec<(Mode, u64)> = modes.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    let outcomes: Vec<Result<RunOutcome>> = jobs
        .par_iter()
        .map(|&(mode, seed)| {
            let out = execute_run(cfg, mode, seed, warm.as_ref());
            match &out {
                Ok(o) => info!(
                    "{mode} seed {seed}: final return {:.6}",
                    o.records.last().map_or(f64::NAN, |r| r.ret)
                ),
                Err(e) => warn!("{mode} seed {seed} failed: {e}"),
            }
            out
        })
        .collect();
    let outcomes: Vec<RunOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    if let Some(base) = &cfg.save_meta {
        for o in outcomes.iter().filter(|o| o.mode == Mode::Pm) {
            let model = o.meta.as_ref().ok_or_else(|| Error::State("PM run without meta model".into()))?;
            let rng = RngState { es_seed: o.seed, meta_seed: o.seed };
            save_meta(&meta_save_path(base, o.seed, seeds.len()), model, rng, cfg.snapshot())?;
        }
    }

    let summary = ExperimentSummary {
        total_iterations: cfg.total_iterations,
        modes: modes
            .iter()
            .map(|&m| {
                let of_mode: Vec<&RunOutcome> = outcomes.iter().filter(|o| o.mode == m).collect();
                summarize(cfg, m, &of_mode)
            })
            .collect(),
        config: cfg.snapshot(),
    };
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

/// Pretrains a meta model on `cfg.pretrain.task` with the PM setup of the
/// first seed.
pub fn pretrain(cfg: &RunConfig) -> Result<MetaModel> {
    cfg.validate()?;
    let seed = cfg.seeds[0];
    let setup: RunSetup = cfg.setup(Mode::Pm, seed)?;
    let task = Task::new(TaskConfig { seed, ..cfg.pretrain.task.clone() }, setup.es.gamma)?;
    crate::persist::pretrain_meta(&task, cfg.pretrain.meta_updates, &setup)
}
