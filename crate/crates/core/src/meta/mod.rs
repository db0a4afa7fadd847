//! Meta level: the parametric LSTM+MLP model trained by ES and the
//! nonparametric Bayesian-optimization alternative.

mod buffer;
pub mod bo;
pub mod gp;
pub mod npm;
pub mod pm;

pub use buffer::PopulationReplayBuffer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::es::{es_update, EsConfig, Objective};
use crate::hyper::HyperParams;

/// Nonparametric (Bayesian optimization) meta-level settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NpmConfig {
    /// Objective evaluations per BO round.
    pub budget: usize,
    /// Random candidates scored by expected improvement per proposal.
    pub candidate_count: usize,
    /// Squared-exponential length scale in the unit cube.
    pub length_scale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
    /// Observations from more than this many earlier rounds are dropped.
    pub window_rounds: u64,
}

impl Default for NpmConfig {
    fn default() -> Self {
        Self {
            budget: 5,
            candidate_count: 256,
            length_scale: 0.2,
            signal_variance: 1.0,
            noise_variance: 1e-6,
            window_rounds: 3,
        }
    }
}

impl NpmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("meta.npm.budget must be >= 1".into()));
        }
        if self.candidate_count == 0 {
            return Err(Error::Config("meta.npm.candidate_count must be >= 1".into()));
        }
        if !(self.length_scale > 0.0 && self.signal_variance > 0.0 && self.noise_variance >= 0.0) {
            return Err(Error::Config("meta.npm kernel parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Meta-level settings shared by both designs, plus the ES parameters of
/// the parametric model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaConfig {
    /// Meta population size.
    pub m: usize,
    /// Meta learning rate.
    pub beta: f64,
    /// Meta noise scale.
    pub omega: f64,
    /// Monte Carlo repeats of the one-step lookahead.
    pub l: usize,
    /// Inner iterations between meta updates; also the encoder sequence length.
    pub k: usize,
    /// LSTM encoder width.
    pub hidden_dim: usize,
    /// Share lookahead inner noise across meta perturbations (and across BO
    /// candidates of one round), so their fitness differences come from the
    /// hyperparameters alone.
    pub common_noise: bool,
    pub seed: u64,
    pub npm: NpmConfig,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            m: 200,
            beta: 0.006,
            omega: 0.05,
            l: 3,
            k: 10,
            hidden_dim: 1024,
            common_noise: true,
            seed: 1,
            npm: NpmConfig::default(),
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Config(format!("meta.m must be >= 2, got {}", self.m)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("meta.beta must be non-negative, got {}", self.beta)));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::Config(format!("meta.omega must be positive, got {}", self.omega)));
        }
        if self.l == 0 || self.k == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("meta.l, meta.k and meta.hidden_dim must be >= 1".into()));
        }
        self.npm.validate()
    }
}

/// Mean fitness after one inner ES step from `theta` under `hyper`, over one
/// repetition per entry of `seeds`. `theta` is never modified.
pub fn construct_meta_fitness<O: Objective + ?Sized>(
    hyper: &HyperParams,
    theta: &[f64],
    objective: &O,
    es: &EsConfig,
    iteration: u64,
    seeds: &[u64],
) -> Result<f64> {
    if seeds.is_empty() {
        return Err(Error::Config("lookahead needs at least one repetition".into()));
    }
    let mut total = 0.0;
    for (repetition, &seed) in seeds.iter().enumerate() {
        let wrap = |e: Error| Error::Lookahead { repetition, source: Box::new(e) };
        let (next, _) = es_update(theta, es, hyper, objective, iteration, seed).map_err(wrap)?;
        let value = objective.evaluate(&next, iteration);
        if !value.is_finite() {
            return Err(wrap(Error::Evaluation { index: es.n, value }));
        }
        total += value;
    }
    Ok(total / seeds.len() as f64)
}
