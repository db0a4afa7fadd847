//! Experiment harness: configuration, seeded runs, summaries, sweeps and
//! learning-curve plots.

mod config;
mod experiment;
mod plot;
mod sweep;

pub use config::{
    apply_override, load_config, BaselineConfig, HyperConfig, HyperName, PretrainConfig, Profile, RunConfig,
    SweepAxis, SweepConfig,
};
pub use experiment::{
    checkpoint_path, execute_run, mean_std, median, meta_save_path, pretrain, read_records, recovery_iterations,
    run_csv_path, run_experiment, timing_csv_path, write_records, ExperimentSummary, ModeSummary, RunOutcome,
    CSV_COLUMNS,
};
pub use plot::{group_by_mode, load_curve, plot_curves, render_svg, Curve, CurveGroup};
pub use sweep::run_sweep;
