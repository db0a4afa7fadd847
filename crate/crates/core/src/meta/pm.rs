//! Parametric meta level: propose hyperparameters from the population
//! history and train the proposal network by ES on a one-step lookahead.

use rayon::prelude::*;

use super::{construct_meta_fitness, MetaConfig, PopulationReplayBuffer};
use crate::error::{Error, Result};
use crate::es::{estimate_search_gradient, noise_for, perturb, EsConfig, FitnessShaping, Objective};
use crate::hyper::{HyperParams, HyperSpace};
use crate::nn::MetaModel;
use crate::rng::{stream_seed, Stream};

/// `H = φ(ψ(S))` for the buffer's current (normalized) window.
pub fn propose_hyperparams(
    meta: &MetaModel,
    buffer: &PopulationReplayBuffer,
    space: &HyperSpace,
) -> Result<HyperParams> {
    let window = buffer.normalized_window()?;
    let adapted = meta.forward(&window, &space.ranges())?;
    space.assemble(&adapted)
}

/// Truncated meta fitness of a (perturbed) meta model: propose `H` once,
/// then average the return after one inner step over the lookahead seeds.
#[allow(clippy::too_many_arguments)]
pub fn estimate_meta_fitness<O: Objective + ?Sized>(
    meta: &MetaModel,
    theta: &[f64],
    buffer: &PopulationReplayBuffer,
    objective: &O,
    es: &EsConfig,
    space: &HyperSpace,
    iteration: u64,
    seeds: &[u64],
) -> Result<f64> {
    let hyper = propose_hyperparams(meta, buffer, space)?;
    construct_meta_fitness(&hyper, theta, objective, es, iteration, seeds)
}

/// Seeds of the `l` lookahead repetitions for meta perturbation `j`.
pub fn lookahead_seeds(cfg: &MetaConfig, update: u64, j: usize) -> Vec<u64> {
    (0..cfg.l as u64)
        .map(|i| {
            if cfg.common_noise {
                stream_seed(cfg.seed, Stream::Lookahead, &[update, i])
            } else {
                stream_seed(cfg.seed, Stream::Lookahead, &[update, i, j as u64 + 1])
            }
        })
        .collect()
}

/// `ϑ + β/(mω) Σ s(F_j) ε_j` for explicit noise and fitness values.
pub fn meta_gradient_step(
    params: &[f64],
    noises: &[Vec<f64>],
    fitness: &[f64],
    beta: f64,
    omega: f64,
    shaping: FitnessShaping,
) -> Result<Vec<f64>> {
    let grad = estimate_search_gradient(noises, fitness, omega, shaping)?;
    if grad.len() != params.len() {
        return Err(Error::Invariant("meta noise and parameter lengths differ".into()));
    }
    Ok(params.iter().zip(&grad).map(|(p, g)| p + beta * g).collect())
}

/// Outcome of one meta-level ES update.
#[derive(Debug)]
pub struct MetaUpdate {
    pub model: MetaModel,
    /// Meta fitness of each perturbation, in perturbation order.
    pub fitness: Vec<f64>,
    /// Set when a lookahead failed; `model` is then the unchanged input.
    pub failure: Option<Error>,
}

/// One ES update of the meta parameters. `update` indexes the meta update
/// within the run and selects the noise streams. Inner parameters are only
/// read.
#[allow(clippy::too_many_arguments)]
pub fn meta_es_update<O: Objective + ?Sized>(
    meta: &MetaModel,
    theta: &[f64],
    buffer: &PopulationReplayBuffer,
    cfg: &MetaConfig,
    es: &EsConfig,
    space: &HyperSpace,
    objective: &O,
    iteration: u64,
    update: u64,
) -> Result<MetaUpdate> {
    if buffer.is_empty() {
        return Err(Error::State("meta update needs at least one replay row".into()));
    }
    let dim = meta.len();
    let noise_seed = stream_seed(cfg.seed, Stream::MetaNoise, &[update]);
    let results: Vec<Result<f64>> = (0..cfg.m)
        .into_par_iter()
        .map(|j| {
            let eps = noise_for(noise_seed, j, dim, false);
            let perturbed = meta.with_params(perturb(meta.flat(), &eps, cfg.omega))?;
            let seeds = lookahead_seeds(cfg, update, j);
            estimate_meta_fitness(&perturbed, theta, buffer, objective, es, space, iteration, &seeds)
        })
        .collect();

    let mut fitness = Vec::with_capacity(cfg.m);
    for r in results {
        match r {
            Ok(f) => fitness.push(f),
            Err(e) => {
                return Ok(MetaUpdate { model: meta.clone(), fitness, failure: Some(e) });
            }
        }
    }

    // Accumulate Σ s_j ε_j regenerating each ε_j, so the m noise vectors are
    // never held at once.
    let shaped = crate::es::shape(&fitness, es.fitness_shaping);
    let mut grad = vec![0.0; dim];
    for (j, s) in shaped.iter().enumerate() {
        let eps = noise_for(noise_seed, j, dim, false);
        for (g, e) in grad.iter_mut().zip(&eps) {
            *g += s * e;
        }
    }
    let scale = cfg.beta / (cfg.m as f64 * cfg.omega);
    let params: Vec<f64> = meta.flat().iter().zip(&grad).map(|(p, g)| p + scale * g).collect();
    if params.iter().any(|v| !v.is_finite()) {
        let failure = Error::Numerical("meta update produced a non-finite parameter".into());
        return Ok(MetaUpdate { model: meta.clone(), fitness, failure: Some(failure) });
    }
    Ok(MetaUpdate { model: meta.with_params(params)?, fitness, failure: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::es::PopulationFitness;
    use crate::hyper::{HyperRange, HyperSetting};
    use crate::nn::LstmSpec;
    use crate::rng::rng_from;

    fn sphere(x: &[f64]) -> f64 {
        -x.iter().map(|v| v * v).sum::<f64>()
    }

    fn buffer(n: usize, k: usize) -> PopulationReplayBuffer {
        let mut b = PopulationReplayBuffer::new(k);
        for t in 0..k as u64 {
            let values = (0..n).map(|i| -((i as f64) + t as f64).sin().abs()).collect();
            b.push(PopulationFitness { values, iteration: t }).unwrap();
        }
        b
    }

    #[test]
    fn zero_model_proposes_midpoints() {
        let enc = LstmSpec { input_dim: 6, hidden_dim: 8, seq_len: 3 };
        let meta = MetaModel::zeros(enc, 2);
        let h = propose_hyperparams(&meta, &buffer(6, 3), &HyperSpace::default()).unwrap();
        assert_eq!(h, HyperParams::new(0.055, 0.02));
    }

    #[test]
    fn empty_buffer_is_state_error() {
        let enc = LstmSpec { input_dim: 6, hidden_dim: 8, seq_len: 3 };
        let meta = MetaModel::zeros(enc, 2);
        let err = propose_hyperparams(&meta, &PopulationReplayBuffer::new(3), &HyperSpace::default());
        assert!(matches!(err, Err(Error::State(_))));
    }

    #[test]
    fn hand_computed_two_member_update() {
        let noises = vec![vec![1.0, -2.0, 0.5], vec![0.0, 3.0, -1.0]];
        let fitness = [2.0, -1.0];
        let (beta, omega) = (0.1, 0.5);
        let out = meta_gradient_step(&[1.0, 1.0, 1.0], &noises, &fitness, beta, omega, FitnessShaping::Raw)
            .unwrap();
        // β/(mω) = 0.1; F1ε1 + F2ε2 = (2, -7, 2)
        let expected = [1.0 + 0.1 * 2.0, 1.0 + 0.1 * -7.0, 1.0 + 0.1 * 2.0];
        for (a, b) in out.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_beta_keeps_meta_params() {
        let enc = LstmSpec { input_dim: 8, hidden_dim: 4, seq_len: 2 };
        let meta = MetaModel::init(enc, 2, &mut rng_from(1));
        let cfg = MetaConfig { m: 6, beta: 0.0, l: 1, k: 2, hidden_dim: 4, ..MetaConfig::default() };
        let es = EsConfig { n: 8, ..EsConfig::default() };
        let theta = vec![1.0, -2.0, 0.5];
        let out = meta_es_update(&meta, &theta, &buffer(8, 2), &cfg, &es, &HyperSpace::default(), &sphere, 0, 0)
            .unwrap();
        assert!(out.failure.is_none());
        assert_eq!(out.model.flat(), meta.flat());
    }

    #[test]
    fn zero_alpha_lookahead_returns_current_fitness() {
        let enc = LstmSpec { input_dim: 8, hidden_dim: 4, seq_len: 2 };
        let meta = MetaModel::init(enc, 1, &mut rng_from(2));
        let space = HyperSpace {
            sigma: HyperSetting::Adapted(HyperRange { lo: 0.01, hi: 0.1 }),
            alpha: HyperSetting::Fixed(0.0),
        };
        let es = EsConfig { n: 8, ..EsConfig::default() };
        let theta = vec![1.0, -2.0, 0.5];
        let f = estimate_meta_fitness(&meta, &theta, &buffer(8, 2), &sphere, &es, &space, 0, &[1, 2, 3])
            .unwrap();
        assert_eq!(f, sphere(&theta));
    }

    #[test]
    fn failing_lookahead_leaves_model_unchanged() {
        let enc = LstmSpec { input_dim: 8, hidden_dim: 4, seq_len: 2 };
        let meta = MetaModel::init(enc, 2, &mut rng_from(1));
        let cfg = MetaConfig { m: 4, l: 1, k: 2, hidden_dim: 4, ..MetaConfig::default() };
        let es = EsConfig { n: 8, ..EsConfig::default() };
        let bad = |_: &[f64]| f64::INFINITY;
        let out = meta_es_update(&meta, &[0.0, 0.0], &buffer(8, 2), &cfg, &es, &HyperSpace::default(), &bad, 0, 0)
            .unwrap();
        assert!(matches!(out.failure, Some(Error::Lookahead { repetition: 0, .. })));
        assert_eq!(out.model, meta);
    }
}
