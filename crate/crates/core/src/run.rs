//! The integrated bilevel loop: a meta step every `k` inner iterations, then
//! `k` inner ES steps under the hyperparameters the meta level provides.

use std::time::Instant;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::es::{es_step, EsConfig, Objective};
use crate::hyper::{HyperParams, HyperSpace};
use crate::meta::bo::BoState;
use crate::meta::npm::hyper_bo_round;
use crate::meta::pm::{meta_es_update, propose_hyperparams};
use crate::meta::{MetaConfig, PopulationReplayBuffer};
use crate::nn::{LstmSpec, MetaModel};
use crate::record::RunRecord;
use crate::rng::{rng_from, stream_seed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Plain ES with the configured σ and α.
    BaselineFixed,
    /// Parametric meta level (LSTM encoder + generator trained by ES).
    Pm,
    /// Nonparametric meta level (Bayesian optimization).
    Npm,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::BaselineFixed => "baseline_fixed",
            Mode::Pm => "pm",
            Mode::Npm => "npm",
        }
    }

    pub fn is_adaptive(self) -> bool {
        !matches!(self, Mode::BaselineFixed)
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything that determines a run besides the task.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSetup {
    pub mode: Mode,
    pub es: EsConfig,
    pub meta: MetaConfig,
    pub space: HyperSpace,
}

impl RunSetup {
    pub fn validate(&self) -> Result<()> {
        self.es.validate()?;
        if self.mode.is_adaptive() {
            self.meta.validate()?;
            self.space.validate()?;
        }
        Ok(())
    }

    pub fn encoder_spec(&self) -> LstmSpec {
        LstmSpec { input_dim: self.es.n, hidden_dim: self.meta.hidden_dim, seq_len: self.meta.k }
    }

    /// Freshly initialized meta model for this setup's seed.
    pub fn fresh_meta(&self) -> MetaModel {
        let mut rng = rng_from(stream_seed(self.meta.seed, Stream::Init, &[1]));
        MetaModel::init(self.encoder_spec(), self.space.dim(), &mut rng)
    }

    /// Spec hash a meta model must carry to be usable with this setup.
    pub fn meta_spec_hash(&self) -> String {
        MetaModel::zeros(self.encoder_spec(), self.space.dim()).spec_hash()
    }

    /// Lookahead evaluations charged per meta step.
    pub fn lookahead_cost(&self) -> u64 {
        let per_lookahead = (self.meta.l * (self.es.n + 1)) as u64;
        match self.mode {
            Mode::BaselineFixed => 0,
            Mode::Pm => self.meta.m as u64 * per_lookahead,
            Mode::Npm => self.meta.npm.budget as u64 * per_lookahead,
        }
    }

    /// Total lookahead evaluations after `iterations` inner iterations.
    pub fn lookahead_evals_after(&self, iterations: u64) -> u64 {
        let k = self.meta.k as u64;
        iterations.div_ceil(k) * self.lookahead_cost()
    }
}

/// Mutable state of a run; everything needed to resume it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    /// Index of the next inner iteration.
    pub iteration: u64,
    pub theta: Vec<f64>,
    pub meta: Option<MetaModel>,
    pub buffer: PopulationReplayBuffer,
    /// Hyperparameters currently in force (used by the baseline and NPM).
    pub hyper: HyperParams,
    pub bo: Option<BoState>,
    pub inner_evals: u64,
    pub lookahead_evals: u64,
    pub meta_updates: u64,
}

pub struct Run<'a, O: Objective + ?Sized> {
    setup: RunSetup,
    objective: &'a O,
    state: RunState,
}

impl<'a, O: Objective + ?Sized> Run<'a, O> {
    /// Starts a run from `theta0`. PM runs use `meta0` when given (warm
    /// start), otherwise a freshly initialized model.
    pub fn new(
        setup: RunSetup,
        objective: &'a O,
        theta0: Vec<f64>,
        meta0: Option<MetaModel>,
    ) -> Result<Self> {
        setup.validate()?;
        let meta = match setup.mode {
            Mode::Pm => {
                let model = meta0.unwrap_or_else(|| setup.fresh_meta());
                if model.spec_hash() != setup.meta_spec_hash() {
                    return Err(Error::Incompatible(format!(
                        "meta model architecture (n={}, k={}, hidden={}, outputs={}) does not match the run",
                        model.encoder.input_dim,
                        model.encoder.seq_len,
                        model.encoder.hidden_dim,
                        model.generator.output_dim
                    )));
                }
                Some(model)
            }
            _ => None,
        };
        let bo = (setup.mode == Mode::Npm)
            .then(|| BoState::new(setup.space.dim(), setup.meta.npm.clone()));
        let state = RunState {
            iteration: 0,
            theta: theta0,
            meta,
            buffer: PopulationReplayBuffer::new(setup.meta.k),
            hyper: setup.es.hyper(),
            bo,
            inner_evals: 0,
            lookahead_evals: 0,
            meta_updates: 0,
        };
        Ok(Self { setup, objective, state })
    }

    /// Continues a run from saved state.
    pub fn resume(setup: RunSetup, objective: &'a O, state: RunState) -> Result<Self> {
        setup.validate()?;
        if let Some(meta) = &state.meta {
            if meta.spec_hash() != setup.meta_spec_hash() {
                return Err(Error::Incompatible("saved meta model does not match the run".into()));
            }
        }
        Ok(Self { setup, objective, state })
    }

    pub fn setup(&self) -> &RunSetup {
        &self.setup
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    pub fn into_state(self) -> RunState {
        self.state
    }

    fn meta_step(&mut self) -> Result<()> {
        let t = self.state.iteration;
        let s = &mut self.state;
        match self.setup.mode {
            Mode::BaselineFixed => return Ok(()),
            Mode::Pm => {
                s.buffer.prime(self.setup.es.n, t);
                let meta = s.meta.as_ref().ok_or_else(|| Error::State("PM run without a meta model".into()))?;
                let out = meta_es_update(
                    meta,
                    &s.theta,
                    &s.buffer,
                    &self.setup.meta,
                    &self.setup.es,
                    &self.setup.space,
                    self.objective,
                    t,
                    s.meta_updates,
                )?;
                if let Some(e) = &out.failure {
                    warn!("meta update at iteration {t} skipped: {e}");
                }
                s.meta = Some(out.model);
            }
            Mode::Npm => {
                let bo = s.bo.as_mut().ok_or_else(|| Error::State("NPM run without BO state".into()))?;
                match hyper_bo_round(
                    bo,
                    &s.theta,
                    self.objective,
                    &self.setup.es,
                    &self.setup.meta,
                    &self.setup.space,
                    &s.hyper,
                    t,
                ) {
                    Ok(round) => s.hyper = round.hyper,
                    Err(Error::State(msg)) => warn!("BO round at iteration {t} kept previous H: {msg}"),
                    Err(e) => return Err(e),
                }
            }
        }
        s.lookahead_evals += self.setup.lookahead_cost();
        s.meta_updates += 1;
        Ok(())
    }

    /// One inner iteration, preceded by a meta step on interval boundaries.
    pub fn step(&mut self) -> Result<RunRecord> {
        let started = Instant::now();
        let t = self.state.iteration;
        if self.setup.mode.is_adaptive() && t.is_multiple_of(self.setup.meta.k as u64) {
            self.meta_step()?;
        }
        if self.setup.mode == Mode::Pm {
            let meta = self.state.meta.as_ref().expect("PM state holds a model");
            self.state.hyper = propose_hyperparams(meta, &self.state.buffer, &self.setup.space)?;
        }
        let hyper = self.state.hyper;
        if self.setup.mode.is_adaptive() && !self.setup.space.admits(&hyper) {
            return Err(Error::Invariant(format!("hyperparameters {hyper:?} left their ranges")));
        }
        let es = &self.setup.es;
        let step = es_step(&self.state.theta, es, &hyper, self.objective, t, es.noise_seed(t))?;
        self.state.inner_evals += es.n as u64;
        let record = RunRecord {
            iteration: t,
            ret: step.center_return,
            pop_mean: step.fitness.mean(),
            pop_max: step.fitness.max(),
            sigma: hyper.sigma,
            alpha: hyper.alpha,
            inner_evals: self.state.inner_evals,
            lookahead_evals: self.state.lookahead_evals,
            wall_ms: 0.0,
            seed: es.seed,
        };
        if self.setup.mode == Mode::Pm {
            self.state.buffer.push(step.fitness)?;
        }
        self.state.theta = step.params;
        self.state.iteration += 1;
        Ok(RunRecord { wall_ms: started.elapsed().as_secs_f64() * 1e3, ..record })
    }

    /// Steps until `total` inner iterations have run, handing each record to
    /// `sink`.
    pub fn run_until<F>(&mut self, total: u64, mut sink: F) -> Result<()>
    where
        F: FnMut(&RunRecord, &Self) -> Result<()>,
    {
        while self.state.iteration < total {
            let record = self.step()?;
            sink(&record, self)?;
        }
        Ok(())
    }
}

/// Runs `total` inner iterations and returns the final parameters with the
/// record stream.
pub fn integrated_loop<O: Objective + ?Sized>(
    setup: RunSetup,
    objective: &O,
    theta0: Vec<f64>,
    meta0: Option<MetaModel>,
    total: u64,
) -> Result<(Vec<f64>, Vec<RunRecord>)> {
    let mut run = Run::new(setup, objective, theta0, meta0)?;
    let mut records = Vec::with_capacity(total as usize);
    run.run_until(total, |r, _| {
        records.push(r.clone());
        Ok(())
    })?;
    Ok((run.into_state().theta, records))
}
