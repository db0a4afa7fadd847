use std::path::PathBuf;
use std::process::ExitCode;

use bierl::harness::{self, load_config, Profile, RunConfig, SweepAxis};
use bierl::persist::{save_meta, RngState};
use bierl::{Error, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

/// Bilevel evolution strategies experiment runner.
///
/// Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 I/O error.
/// BIERL_WORKERS caps the worker threads (default: all cores).
#[derive(Parser)]
#[command(name = "bierl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured (mode, seed) pair and write CSVs and summary.json.
    Run(RunArgs),
    /// Repeat the experiment for each value of one parameter.
    Sweep(SweepArgs),
    /// Pretrain a meta model on the pretraining task and save it.
    Pretrain(PretrainArgs),
    /// Draw mean ± std learning curves from run CSVs.
    Plot(PlotArgs),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Default set: quickstart or paper_scale.
    #[arg(long)]
    profile: Option<String>,
    /// Comma-separated seeds, e.g. 1,2,3.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any key, e.g. --set es.n=100 --set task.kind=cartpole_swingup.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self, extra: Vec<String>) -> Result<RunConfig> {
        let profile = self.profile.as_deref().map(str::parse::<Profile>).transpose()?;
        let mut overrides = self.overrides.clone();
        if !self.seeds.is_empty() {
            let list: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
            overrides.push(format!("seeds=[{}]", list.join(",")));
        }
        if let Some(out) = &self.out {
            overrides.push(format!("output_dir={}", toml_string(&out.to_string_lossy())));
        }
        overrides.extend(extra);
        load_config(self.config.as_deref(), profile, &overrides)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Modes to run (baseline_fixed, pm, npm); repeatable.
    #[arg(long = "mode")]
    modes: Vec<String>,
    /// Warm start PM runs from this meta model.
    #[arg(long)]
    load_meta: Option<PathBuf>,
    /// Save the final PM meta model(s) here.
    #[arg(long)]
    save_meta: Option<PathBuf>,
    /// Checkpoint every N iterations.
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Continue from existing checkpoints.
    #[arg(long)]
    resume: bool,
}

impl RunArgs {
    fn overrides(&self) -> Vec<String> {
        let mut o = Vec::new();
        if !self.modes.is_empty() {
            let list: Vec<String> = self.modes.iter().map(|m| toml_string(m)).collect();
            o.push(format!("modes=[{}]", list.join(",")));
        }
        if let Some(p) = &self.load_meta {
            o.push(format!("load_meta={}", toml_string(&p.to_string_lossy())));
        }
        if let Some(p) = &self.save_meta {
            o.push(format!("save_meta={}", toml_string(&p.to_string_lossy())));
        }
        if let Some(n) = self.checkpoint_every {
            o.push(format!("checkpoint_every={n}"));
        }
        if self.resume {
            o.push("resume=true".into());
        }
        o
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Parameter to vary: n, m, omega, beta, k or l. Defaults to sweep.axis.
    #[arg(long)]
    axis: Option<String>,
    /// Comma-separated values. Defaults to sweep.values.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
}

#[derive(Args)]
struct PretrainArgs {
    #[command(flatten)]
    common: Common,
    /// Where to write the meta model.
    #[arg(long)]
    save_meta: PathBuf,
    /// Meta updates on the pretraining task.
    #[arg(long)]
    iterations: Option<u64>,
}

#[derive(Args)]
struct PlotArgs {
    /// Output SVG.
    #[arg(long)]
    out: PathBuf,
    /// Run CSVs; files named <mode>_seed<s>.csv are grouped by mode.
    #[arg(required = true)]
    csv: Vec<PathBuf>,
}

fn toml_string(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn configure_workers() -> Result<()> {
    let Ok(raw) = std::env::var("BIERL_WORKERS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("BIERL_WORKERS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::State(format!("worker pool: {e}")))
}

fn print_summary(summary: &harness::ExperimentSummary) {
    for m in &summary.modes {
        let recovery = m.recovery_median.map(|r| format!("  recovery median {r}")).unwrap_or_default();
        println!(
            "{:<15} n={:<4} final {:.6} ± {:.6}  auc {:.6} ± {:.6}  evals {}{recovery}",
            m.mode.to_string(),
            m.population,
            m.final_mean,
            m.final_std,
            m.auc_mean,
            m.auc_std,
            m.total_evaluations.first().copied().unwrap_or(0),
        );
    }
}

fn execute(cli: Cli) -> Result<()> {
    configure_workers()?;
    match cli.command {
        Command::Run(args) => {
            let cfg = args.common.load(args.overrides())?;
            let summary = harness::run_experiment(&cfg)?;
            print_summary(&summary);
            println!("results in {}", cfg.output_dir.display());
        }
        Command::Sweep(args) => {
            let cfg = args.run.common.load(args.run.overrides())?;
            let axis: SweepAxis = match args.axis.as_deref() {
                Some(a) => a.parse()?,
                None => cfg.sweep.axis.ok_or_else(|| Error::Config("sweep needs --axis or sweep.axis".into()))?,
            };
            let values = if args.values.is_empty() { cfg.sweep.values.clone() } else { args.values };
            for (v, summary) in harness::run_sweep(&cfg, axis, &values)? {
                println!("{} = {v}", axis.name());
                print_summary(&summary);
            }
        }
        Command::Pretrain(args) => {
            let extra = args.iterations.map(|i| vec![format!("pretrain.meta_updates={i}")]).unwrap_or_default();
            let cfg = args.common.load(extra)?;
            let model = harness::pretrain(&cfg)?;
            let seed = cfg.seeds[0];
            save_meta(&args.save_meta, &model, RngState { es_seed: seed, meta_seed: seed }, cfg.snapshot())?;
            info!("pretrained for {} meta updates", cfg.pretrain.meta_updates);
            println!("meta model written to {}", args.save_meta.display());
        }
        Command::Plot(args) => {
            let groups = harness::group_by_mode(&args.csv);
            harness::plot_curves(&groups, &args.out)?;
            println!("plot written to {}", args.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

