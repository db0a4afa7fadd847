//! Bayesian optimization over the unit cube with a GP surrogate and
//! expected-improvement proposals scored on random candidates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gp::{expected_improvement, GaussianProcess, SquaredExponential};
use super::NpmConfig;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Point in `[0, 1]^dim`.
    pub point: Vec<f64>,
    pub value: f64,
    /// Round the observation was made in.
    pub round: u64,
}

/// Observations carried across BO rounds of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoState {
    pub dim: usize,
    pub config: NpmConfig,
    pub observations: Vec<Observation>,
    /// Number of rounds started so far.
    pub rounds: u64,
}

impl BoState {
    pub fn new(dim: usize, config: NpmConfig) -> Self {
        Self { dim, config, observations: Vec::new(), rounds: 0 }
    }

    fn kernel(&self) -> SquaredExponential {
        SquaredExponential {
            length_scale: self.config.length_scale,
            signal_variance: self.config.signal_variance,
        }
    }

    /// Targets standardized within their own round (std floored at 1e-8), so
    /// rounds measured at different inner parameters share only shape.
    pub fn standardized_targets(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.observations.len()];
        let mut rounds: Vec<u64> = self.observations.iter().map(|o| o.round).collect();
        rounds.sort_unstable();
        rounds.dedup();
        for r in rounds {
            let idx: Vec<usize> =
                (0..self.observations.len()).filter(|&i| self.observations[i].round == r).collect();
            let vals: Vec<f64> = idx.iter().map(|&i| self.observations[i].value).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            let sd = var.sqrt().max(1e-8);
            for (&i, v) in idx.iter().zip(&vals) {
                out[i] = (v - mean) / sd;
            }
        }
        out
    }

    pub fn surrogate(&self) -> Result<GaussianProcess> {
        if self.observations.is_empty() {
            return Err(Error::State("GP posterior needs at least one observation".into()));
        }
        let xs = self.observations.iter().map(|o| o.point.clone()).collect();
        GaussianProcess::fit(xs, &self.standardized_targets(), self.kernel(), self.config.noise_variance)
    }

    /// Posterior mean and variance at `query`, in standardized units.
    pub fn gp_posterior(&self, query: &[f64]) -> Result<(f64, f64)> {
        Ok(self.surrogate()?.predict(query))
    }

    fn prune(&mut self) {
        let oldest = self.rounds.saturating_sub(self.config.window_rounds);
        self.observations.retain(|o| o.round >= oldest);
    }

    fn propose<R: Rng>(&self, rng: &mut R, extra: &[Vec<f64>]) -> Result<Vec<f64>> {
        let random = |rng: &mut R| (0..self.dim).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
        if self.observations.is_empty() {
            return Ok(random(rng));
        }
        let gp = self.surrogate()?;
        let targets = self.standardized_targets();
        let (best_idx, best) = targets
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let mut candidates: Vec<Vec<f64>> =
            (0..self.config.candidate_count).map(|_| random(rng)).collect();
        candidates.push(self.observations[best_idx].point.clone());
        candidates.extend(extra.iter().filter(|p| p.len() == self.dim).cloned());
        let mut chosen = 0;
        let mut chosen_ei = f64::NEG_INFINITY;
        for (i, c) in candidates.iter().enumerate() {
            let (m, v) = gp.predict(c);
            let ei = expected_improvement(m, v, best);
            if ei > chosen_ei {
                chosen = i;
                chosen_ei = ei;
            }
        }
        Ok(candidates.swap_remove(chosen))
    }
}

/// Result of one BO round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub point: Vec<f64>,
    pub value: f64,
    /// Objective evaluations attempted, successful or not.
    pub evaluations: usize,
}

/// Runs `budget` propose-evaluate-append steps and returns the best point
/// observed in this round. `extra` points join the candidate pool of every
/// proposal.
pub fn bo_round<F>(
    state: &mut BoState,
    budget: usize,
    seed: u64,
    extra: &[Vec<f64>],
    mut objective: F,
) -> Result<RoundResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if budget == 0 {
        return Err(Error::Config("BO budget must be >= 1".into()));
    }
    let round = state.rounds;
    state.rounds += 1;
    state.prune();

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut last_error = None;
    for b in 0..budget {
        let mut rng = rng_from(derive_seed(seed, &[round, b as u64]));
        let point = state.propose(&mut rng, extra)?;
        match objective(&point) {
            Ok(value) if value.is_finite() => {
                if best.as_ref().is_none_or(|(_, v)| value > *v) {
                    best = Some((point.clone(), value));
                }
                state.observations.push(Observation { point, value, round });
            }
            Ok(value) => last_error = Some(Error::Evaluation { index: b, value }),
            Err(e) => last_error = Some(e),
        }
    }
    match best {
        Some((point, value)) => Ok(RoundResult { point, value, evaluations: budget }),
        None => Err(Error::State(format!(
            "all {budget} BO evaluations failed; last error: {}",
            last_error.map_or_else(|| "none".to_string(), |e| e.to_string())
        ))),
    }
}
