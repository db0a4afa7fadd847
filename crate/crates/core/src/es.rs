//! Vanilla evolution strategies: Gaussian population sampling, the Monte
//! Carlo search gradient and the plain SGD ascent step.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyper::HyperParams;
use crate::rng::{derive_seed, rng_from, stream_seed, Stream};

/// A fitness function to be maximized.
///
/// `iteration` is the inner iteration the evaluation belongs to; stationary
/// objectives ignore it.
pub trait Objective: Sync {
    fn evaluate(&self, params: &[f64], iteration: u64) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, params: &[f64], _iteration: u64) -> f64 {
        self(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessShaping {
    Raw,
    #[default]
    CenteredRank,
}

/// Fitness values of one sampled population, in individual order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationFitness {
    pub values: Vec<f64>,
    pub iteration: u64,
}

impl PopulationFitness {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EsConfig {
    /// Population size.
    pub n: usize,
    pub alpha: f64,
    pub sigma: f64,
    /// Reward decay used by episodic tasks.
    pub gamma: f64,
    pub fitness_shaping: FitnessShaping,
    pub antithetic: bool,
    pub seed: u64,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            n: 200,
            alpha: 0.02,
            sigma: 0.05,
            gamma: 1.0,
            fitness_shaping: FitnessShaping::CenteredRank,
            antithetic: false,
            seed: 1,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("population size n must be >= 2, got {}", self.n)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if self.antithetic && !self.n.is_multiple_of(2) {
            return Err(Error::Config(format!("antithetic sampling needs an even n, got {}", self.n)));
        }
        Ok(())
    }

    /// Seed of the inner population noise at `iteration`.
    pub fn noise_seed(&self, iteration: u64) -> u64 {
        stream_seed(self.seed, Stream::InnerNoise, &[iteration])
    }

    /// The configured σ and α as a fixed pair.
    pub fn hyper(&self) -> HyperParams {
        HyperParams::new(self.sigma, self.alpha)
    }
}

/// Sampled noise directions and the parameter vectors they perturb.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub noises: Vec<Vec<f64>>,
    pub perturbed: Vec<Vec<f64>>,
}

/// Standard normal noise for individual `index`. Each individual owns an
/// independent stream, so sampling order and thread count are irrelevant.
/// Antithetic populations share a stream per pair and flip the sign of the
/// odd member.
pub fn noise_for(noise_seed: u64, index: usize, dim: usize, antithetic: bool) -> Vec<f64> {
    let (stream, sign) = if antithetic {
        (index / 2, if index % 2 == 1 { -1.0 } else { 1.0 })
    } else {
        (index, 1.0)
    };
    let mut rng = rng_from(derive_seed(noise_seed, &[stream as u64]));
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sign * z
        })
        .collect()
}

pub(crate) fn perturb(theta: &[f64], noise: &[f64], sigma: f64) -> Vec<f64> {
    theta.iter().zip(noise).map(|(t, e)| t + sigma * e).collect()
}

pub fn sample_population(
    noise_seed: u64,
    theta: &[f64],
    sigma: f64,
    n: usize,
    antithetic: bool,
) -> Result<Population> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    if n < 2 || (antithetic && !n.is_multiple_of(2)) {
        return Err(Error::Config(format!("invalid population size {n}")));
    }
    Ok(sample_unchecked(noise_seed, theta, sigma, n, antithetic))
}

pub(crate) fn sample_unchecked(
    noise_seed: u64,
    theta: &[f64],
    sigma: f64,
    n: usize,
    antithetic: bool,
) -> Population {
    let noises: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| noise_for(noise_seed, i, theta.len(), antithetic))
        .collect();
    let perturbed = noises.iter().map(|e| perturb(theta, e, sigma)).collect();
    Population { noises, perturbed }
}

/// Centered ranks in `[-0.5, 0.5]`. Ties share their average rank, so a
/// constant vector maps to all zeros.
pub fn centered_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end - 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    let scale = (n - 1) as f64;
    let mut shaped: Vec<f64> = ranks.iter().map(|r| r / scale - 0.5).collect();
    let mean = shaped.iter().sum::<f64>() / n as f64;
    for s in &mut shaped {
        *s -= mean;
    }
    shaped
}

pub fn shape(values: &[f64], shaping: FitnessShaping) -> Vec<f64> {
    match shaping {
        FitnessShaping::Raw => values.to_vec(),
        FitnessShaping::CenteredRank => centered_ranks(values),
    }
}

/// `(1 / (n σ)) Σ s(f_i) ε_i`, reduced in index order.
pub fn estimate_search_gradient(
    noises: &[Vec<f64>],
    fitness: &[f64],
    sigma: f64,
    shaping: FitnessShaping,
) -> Result<Vec<f64>> {
    if noises.len() != fitness.len() {
        return Err(Error::Invariant(format!(
            "{} noise vectors but {} fitness values",
            noises.len(),
            fitness.len()
        )));
    }
    if noises.is_empty() {
        return Err(Error::Invariant("empty population".into()));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    let dim = noises[0].len();
    if noises.iter().any(|e| e.len() != dim) {
        return Err(Error::Invariant("noise vectors differ in length".into()));
    }
    let weights = shape(fitness, shaping);
    let mut grad = vec![0.0; dim];
    for (w, eps) in weights.iter().zip(noises) {
        for (g, e) in grad.iter_mut().zip(eps) {
            *g += w * e;
        }
    }
    let scale = 1.0 / (noises.len() as f64 * sigma);
    for g in &mut grad {
        *g *= scale;
    }
    Ok(grad)
}

/// Evaluates every member of a population concurrently; results come back in
/// index order and the first non-finite value is reported.
pub fn evaluate_population<O: Objective + ?Sized>(
    objective: &O,
    theta: &[f64],
    noises: &[Vec<f64>],
    sigma: f64,
    iteration: u64,
) -> Result<Vec<f64>> {
    let values: Vec<f64> = noises
        .par_iter()
        .map(|eps| objective.evaluate(&perturb(theta, eps, sigma), iteration))
        .collect();
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Evaluation { index, value });
    }
    Ok(values)
}

fn check_hyper(h: &HyperParams) -> Result<()> {
    if !(h.sigma > 0.0 && h.sigma.is_finite()) {
        return Err(Error::Config(format!("sigma must be positive, got {}", h.sigma)));
    }
    if !(h.alpha >= 0.0 && h.alpha.is_finite()) {
        return Err(Error::Config(format!("alpha must be non-negative, got {}", h.alpha)));
    }
    Ok(())
}

/// One ES update from `theta` without evaluating the unperturbed parameters.
pub fn es_update<O: Objective + ?Sized>(
    theta: &[f64],
    cfg: &EsConfig,
    hyper: &HyperParams,
    objective: &O,
    iteration: u64,
    noise_seed: u64,
) -> Result<(Vec<f64>, PopulationFitness)> {
    check_hyper(hyper)?;
    if cfg.n < 2 || (cfg.antithetic && !cfg.n.is_multiple_of(2)) {
        return Err(Error::Config(format!("invalid population size {}", cfg.n)));
    }
    let noises: Vec<Vec<f64>> = (0..cfg.n)
        .into_par_iter()
        .map(|i| noise_for(noise_seed, i, theta.len(), cfg.antithetic))
        .collect();
    let values = evaluate_population(objective, theta, &noises, hyper.sigma, iteration)?;
    let grad = estimate_search_gradient(&noises, &values, hyper.sigma, cfg.fitness_shaping)?;
    let next: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + hyper.alpha * g).collect();
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("parameter update produced a non-finite entry".into()));
    }
    Ok((next, PopulationFitness { values, iteration }))
}

/// Result of a full inner iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct EsStep {
    pub params: Vec<f64>,
    pub fitness: PopulationFitness,
    /// Fitness of the parameters before the update.
    pub center_return: f64,
}

/// `θ' = θ + α/(nσ) Σ s(f(θ + σ ε_i)) ε_i`, plus the unperturbed return of θ.
pub fn es_step<O: Objective + ?Sized>(
    theta: &[f64],
    cfg: &EsConfig,
    hyper: &HyperParams,
    objective: &O,
    iteration: u64,
    noise_seed: u64,
) -> Result<EsStep> {
    let (params, fitness) = es_update(theta, cfg, hyper, objective, iteration, noise_seed)?;
    let center_return = objective.evaluate(theta, iteration);
    if !center_return.is_finite() {
        return Err(Error::Evaluation { index: cfg.n, value: center_return });
    }
    Ok(EsStep { params, fitness, center_return })
}
