use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::{TaskConfig, TaskKind};
use crate::error::{Error, Result};
use crate::es::EsConfig;
use crate::hyper::{HyperRange, HyperSetting, HyperSpace};
use crate::meta::MetaConfig;
use crate::run::{Mode, RunSetup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Desk-scale sizes that finish in minutes.
    #[default]
    Quickstart,
    /// Sizes of the reference configuration.
    PaperScale,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quickstart" => Ok(Profile::Quickstart),
            "paper_scale" => Ok(Profile::PaperScale),
            _ => Err(Error::Config(format!("unknown profile `{s}` (quickstart, paper_scale)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperName {
    Sigma,
    Alpha,
}

/// Which hyperparameters the meta level controls and their ranges. The
/// others stay at `es.sigma` / `es.alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperConfig {
    pub adapt: Vec<HyperName>,
    pub sigma_range: [f64; 2],
    pub alpha_range: [f64; 2],
}

impl Default for HyperConfig {
    fn default() -> Self {
        Self {
            adapt: vec![HyperName::Sigma, HyperName::Alpha],
            sigma_range: [0.01, 0.10],
            alpha_range: [0.016, 0.024],
        }
    }
}

impl HyperConfig {
    pub fn space(&self, es: &EsConfig) -> Result<HyperSpace> {
        let setting = |name, [lo, hi]: [f64; 2], fixed| -> Result<HyperSetting> {
            Ok(if self.adapt.contains(&name) {
                HyperSetting::Adapted(HyperRange::new(lo, hi)?)
            } else {
                HyperSetting::Fixed(fixed)
            })
        };
        let space = HyperSpace {
            sigma: setting(HyperName::Sigma, self.sigma_range, es.sigma)?,
            alpha: setting(HyperName::Alpha, self.alpha_range, es.alpha)?,
        };
        space.validate()?;
        Ok(space)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    /// Grow the baseline population so its total evaluations cover the
    /// largest adaptive run's inner plus lookahead evaluations.
    pub match_budget: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { match_budget: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    pub task: TaskConfig,
    /// Meta updates spent on the pretraining task.
    pub meta_updates: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self { task: TaskConfig { kind: TaskKind::Sphere, dim: 10, ..TaskConfig::default() }, meta_updates: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    N,
    M,
    Omega,
    Beta,
    K,
    L,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::M => "m",
            SweepAxis::Omega => "omega",
            SweepAxis::Beta => "beta",
            SweepAxis::K => "k",
            SweepAxis::L => "l",
        }
    }

    fn is_count(self) -> bool {
        matches!(self, SweepAxis::N | SweepAxis::M | SweepAxis::K | SweepAxis::L)
    }

    /// Copy of `cfg` with this axis set to `value`.
    pub fn apply(self, cfg: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut out = cfg.clone();
        if self.is_count() && !(value >= 1.0 && value.fract() == 0.0) {
            return Err(Error::Config(format!("sweep over {} needs positive integers, got {value}", self.name())));
        }
        match self {
            SweepAxis::N => out.es.n = value as usize,
            SweepAxis::M => out.meta.m = value as usize,
            SweepAxis::Omega => out.meta.omega = value,
            SweepAxis::Beta => out.meta.beta = value,
            SweepAxis::K => out.meta.k = value as usize,
            SweepAxis::L => out.meta.l = value as usize,
        }
        out.validate()?;
        Ok(out)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "n" => SweepAxis::N,
            "m" => SweepAxis::M,
            "omega" => SweepAxis::Omega,
            "beta" => SweepAxis::Beta,
            "k" => SweepAxis::K,
            "l" => SweepAxis::L,
            _ => return Err(Error::Config(format!("unknown sweep axis `{s}` (n, m, omega, beta, k, l)"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub axis: Option<SweepAxis>,
    pub values: Vec<f64>,
}

/// A complete experiment description. Every key has a default that depends
/// on the profile; files and `--set` overrides change individual keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub profile: Profile,
    pub modes: Vec<Mode>,
    /// Each seed drives the task, the inner noise and the meta noise of one
    /// run; it replaces `task.seed`, `es.seed` and `meta.seed`.
    pub seeds: Vec<u64>,
    pub total_iterations: u64,
    pub output_dir: PathBuf,
    /// Save a resumable checkpoint every this many iterations (0: never).
    pub checkpoint_every: u64,
    /// Continue runs from their checkpoints when present.
    pub resume: bool,
    /// Warm start PM runs from this meta model.
    pub load_meta: Option<PathBuf>,
    /// Save the final meta model of PM runs here.
    pub save_meta: Option<PathBuf>,
    pub task: TaskConfig,
    pub es: EsConfig,
    pub meta: MetaConfig,
    pub hyper: HyperConfig,
    pub baseline: BaselineConfig,
    pub pretrain: PretrainConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::for_profile(Profile::Quickstart)
    }
}

impl RunConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let base = Self {
            profile,
            modes: vec![Mode::BaselineFixed, Mode::Pm, Mode::Npm],
            seeds: vec![1, 2, 3, 4, 5],
            total_iterations: 1000,
            output_dir: PathBuf::from("runs"),
            checkpoint_every: 0,
            resume: false,
            load_meta: None,
            save_meta: None,
            task: TaskConfig { horizon: 1000, ..TaskConfig::default() },
            es: EsConfig::default(),
            meta: MetaConfig::default(),
            hyper: HyperConfig::default(),
            baseline: BaselineConfig::default(),
            pretrain: PretrainConfig::default(),
            sweep: SweepConfig::default(),
        };
        match profile {
            Profile::PaperScale => base,
            Profile::Quickstart => {
                let mut c = base;
                c.es.n = 50;
                c.meta.m = 20;
                c.meta.l = 1;
                c.meta.k = 10;
                c.meta.hidden_dim = 64;
                c.total_iterations = 200;
                c.task.horizon = 200;
                c.pretrain.task.horizon = 200;
                c
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::Config("modes must not be empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.total_iterations == 0 {
            return Err(Error::Config("total_iterations must be positive".into()));
        }
        self.task.validate()?;
        self.pretrain.task.validate()?;
        self.es.validate()?;
        self.meta.validate()?;
        self.hyper.space(&self.es)?;
        Ok(())
    }

    /// Task configuration of the run with `seed`.
    pub fn task_for(&self, seed: u64) -> TaskConfig {
        TaskConfig { seed, ..self.task.clone() }
    }

    /// Setup of one run. The baseline's population may be enlarged by the
    /// budget-matching rule.
    pub fn setup(&self, mode: Mode, seed: u64) -> Result<RunSetup> {
        let mut es = EsConfig { seed, ..self.es.clone() };
        if mode == Mode::BaselineFixed {
            es.n = self.baseline_population();
        }
        Ok(RunSetup {
            mode,
            es,
            meta: MetaConfig { seed, ..self.meta.clone() },
            space: self.hyper.space(&self.es)?,
        })
    }

    /// Evaluations an adaptive `mode` run spends in total.
    pub fn total_evaluations(&self, mode: Mode) -> u64 {
        let setup = RunSetup {
            mode,
            es: self.es.clone(),
            meta: self.meta.clone(),
            space: self.hyper.space(&self.es).unwrap_or_default(),
        };
        let n = if mode == Mode::BaselineFixed { self.baseline_population() } else { self.es.n };
        self.total_iterations * n as u64 + setup.lookahead_evals_after(self.total_iterations)
    }

    /// Baseline population size under the budget-matching rule.
    pub fn baseline_population(&self) -> usize {
        let adaptive = self.modes.iter().filter(|m| m.is_adaptive());
        let extra = adaptive.map(|&m| self.total_evaluations(m) - self.total_iterations * self.es.n as u64).max();
        match extra {
            Some(extra) if self.baseline.match_budget && extra > 0 => {
                let mut n = self.es.n + extra.div_ceil(self.total_iterations) as usize;
                if self.es.antithetic && n % 2 == 1 {
                    n += 1;
                }
                n
            }
            _ => self.es.n,
        }
    }

    /// JSON snapshot stored next to results and in checkpoints.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is serializable")
    }
}

/// Builds a configuration: profile defaults, then the file, then `--set`
/// style `key.path=value` overrides. The profile comes from `profile`, else
/// the file's `profile` key, else quickstart.
pub fn load_config(path: Option<&Path>, profile: Option<Profile>, overrides: &[String]) -> Result<RunConfig> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            // Deserializing the file on its own reports unknown keys and type
            // errors with their line.
            toml::from_str::<RunConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            let table: toml::Table =
                text.parse().map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            Some(table)
        }
        None => None,
    };
    let profile = match (profile, file.as_ref().and_then(|t| t.get("profile"))) {
        (Some(p), _) => p,
        (None, Some(v)) => v
            .as_str()
            .ok_or_else(|| Error::Config("profile must be a string".into()))?
            .parse()?,
        (None, None) => Profile::Quickstart,
    };
    let mut merged = toml::Table::try_from(RunConfig::for_profile(profile))
        .map_err(|e| Error::Config(format!("defaults: {e}")))?;
    if let Some(file) = file {
        merge(&mut merged, file);
    }
    for item in overrides {
        apply_override(&mut merged, item)?;
    }
    merged.insert("profile".into(), toml::Value::try_from(profile).expect("profile serializes"));
    let cfg: RunConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Applies `a.b.c=value`; `value` is read as TOML and falls back to a bare
/// string.
pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        node = match node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        {
            toml::Value::Table(t) => t,
            _ => return Err(Error::Config(format!("override `{key}`: `{part}` is not a section"))),
        };
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quickstart_defaults() {
        let c = RunConfig::for_profile(Profile::Quickstart);
        assert_eq!((c.es.n, c.meta.m, c.meta.l, c.meta.k, c.meta.hidden_dim), (50, 20, 1, 10, 64));
        assert_eq!((c.total_iterations, c.task.horizon), (200, 200));
        assert_eq!(c.seeds, vec![1, 2, 3, 4, 5]);
        c.validate().unwrap();
    }

    #[test]
    fn paper_scale_defaults() {
        let c = RunConfig::for_profile(Profile::PaperScale);
        assert_eq!((c.es.n, c.es.alpha, c.es.sigma, c.es.gamma), (200, 0.02, 0.05, 1.0));
        assert_eq!((c.meta.m, c.meta.beta, c.meta.omega, c.meta.k), (200, 0.006, 0.05, 10));
        assert_eq!(c.pretrain.meta_updates, 10);
    }

    #[test]
    fn precedence_cli_over_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "total_iterations = 30\n[es]\nn = 12\nalpha = 0.03\n").unwrap();
        let c = load_config(Some(&p), None, &["es.n=16".into(), "task.kind=rastrigin".into()]).unwrap();
        assert_eq!(c.es.n, 16);
        assert_eq!(c.es.alpha, 0.03);
        assert_eq!(c.total_iterations, 30);
        assert_eq!(c.task.kind, TaskKind::Rastrigin);
        assert_eq!(c.meta.m, 20);
    }

    #[test]
    fn file_profile_selects_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "profile = \"paper_scale\"\n").unwrap();
        assert_eq!(load_config(Some(&p), None, &[]).unwrap().es.n, 200);
        assert_eq!(load_config(Some(&p), Some(Profile::Quickstart), &[]).unwrap().es.n, 50);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[es]\nn = 10\npopulation = 3\n").unwrap();
        let msg = load_config(Some(&p), None, &[]).unwrap_err().to_string();
        assert!(msg.contains("population") && msg.contains("line 3"), "{msg}");
        assert!(matches!(load_config(None, None, &["es.bogus=1".into()]), Err(Error::Config(_))));
    }

    #[test]
    fn matched_baseline_population() {
        let c = RunConfig::for_profile(Profile::Quickstart);
        // PM: 20 updates · 20 · 1 · 51 = 20400 extra over 200 iterations.
        assert_eq!(c.baseline_population(), 50 + 102);
        assert_eq!(c.total_evaluations(Mode::Pm), 200 * 50 + 20400);
        assert!(c.total_evaluations(Mode::BaselineFixed) >= c.total_evaluations(Mode::Pm));
        let only_base = RunConfig { modes: vec![Mode::BaselineFixed], ..c };
        assert_eq!(only_base.baseline_population(), 50);
    }

    #[test]
    fn sweep_axis_rejects_fractional_counts() {
        let c = RunConfig::default();
        assert!(SweepAxis::N.apply(&c, 2.5).is_err());
        assert_eq!(SweepAxis::Beta.apply(&c, 0.01).unwrap().meta.beta, 0.01);
    }
}
