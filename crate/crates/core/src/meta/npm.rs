//! Nonparametric meta level: pick hyperparameters by Bayesian optimization
//! of the one-step lookahead fitness.

use super::bo::{bo_round, BoState};
use super::{construct_meta_fitness, MetaConfig};
use crate::error::Result;
use crate::es::{EsConfig, Objective};
use crate::hyper::{HyperParams, HyperSpace};
use crate::rng::{stream_seed, Stream};

/// Stream word that separates BO lookahead noise from the parametric level's.
const BO_LOOKAHEAD: u64 = u64::MAX;

/// Outcome of one hyperparameter search round.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperRound {
    pub hyper: HyperParams,
    pub value: f64,
    pub evaluations: usize,
}

/// One BO round over the adapted hyperparameters at the current inner
/// parameters. `current` joins the candidate pool.
#[allow(clippy::too_many_arguments)]
pub fn hyper_bo_round<O: Objective + ?Sized>(
    state: &mut BoState,
    theta: &[f64],
    objective: &O,
    es: &EsConfig,
    meta: &MetaConfig,
    space: &HyperSpace,
    current: &HyperParams,
    iteration: u64,
) -> Result<HyperRound> {
    let round = state.rounds;
    let mut evaluation = 0u64;
    let seed = stream_seed(meta.seed, Stream::Bayes, &[]);
    let extra = vec![space.to_unit(current)];
    let result = bo_round(state, meta.npm.budget, seed, &extra, |unit| {
        let hyper = space.from_unit(unit)?;
        let seeds: Vec<u64> = (0..meta.l as u64)
            .map(|i| {
                let words = if meta.common_noise {
                    vec![BO_LOOKAHEAD, round, i]
                } else {
                    vec![BO_LOOKAHEAD, round, i, evaluation + 1]
                };
                stream_seed(meta.seed, Stream::Lookahead, &words)
            })
            .collect();
        evaluation += 1;
        construct_meta_fitness(&hyper, theta, objective, es, iteration, &seeds)
    })?;
    Ok(HyperRound {
        hyper: space.from_unit(&result.point)?,
        value: result.value,
        evaluations: result.evaluations,
    })
}
