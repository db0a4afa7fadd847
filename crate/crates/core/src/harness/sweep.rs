use std::fs;

use log::warn;

use super::config::{RunConfig, SweepAxis};
use super::experiment::{run_experiment, ExperimentSummary};
use crate::error::{Error, Result};

/// One experiment per axis value, each in `<output_dir>/<axis>_<value>`,
/// plus `sweep_<axis>.csv` with one row per (value, mode) ordered by value.
pub fn run_sweep(cfg: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<(f64, ExperimentSummary)>> {
    if values.is_empty() {
        return Err(Error::Config(format!("sweep over {} needs at least one value", axis.name())));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Config(format!("sweep value {v} is not finite")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let before = sorted.len();
    sorted.dedup();
    if sorted.len() != before {
        warn!("duplicate {} values removed from the sweep", axis.name());
    }
    // Validate every point before spending time on any of them.
    let configs = sorted
        .iter()
        .map(|&v| {
            let mut c = axis.apply(cfg, v)?;
            c.output_dir = cfg.output_dir.join(format!("{}_{v}", axis.name()));
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut results = Vec::with_capacity(configs.len());
    for (v, c) in sorted.iter().zip(&configs) {
        results.push((*v, run_experiment(c)?));
    }

    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let path = cfg.output_dir.join(format!("sweep_{}.csv", axis.name()));
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::format(&path, e.to_string()))?;
    let header = [axis.name(), "mode", "population", "final_mean", "final_std", "auc_mean", "auc_std", "total_evaluations"];
    w.write_record(header).map_err(|e| Error::format(&path, e.to_string()))?;
    for (v, s) in &results {
        for m in &s.modes {
            let total = m.total_evaluations.first().copied().unwrap_or(0);
            w.write_record([
                v.to_string(),
                m.mode.to_string(),
                m.population.to_string(),
                m.final_mean.to_string(),
                m.final_std.to_string(),
                m.auc_mean.to_string(),
                m.auc_std.to_string(),
                total.to_string(),
            ])
            .map_err(|e| Error::format(&path, e.to_string()))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(results)
}
