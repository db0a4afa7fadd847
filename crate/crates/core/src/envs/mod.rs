//! Bundled fitness landscapes: analytic functions and two small
//! deterministic control tasks. Every task is a maximization problem.

mod control;
mod functions;

pub use control::{CartpoleSwingup, PointMassNav};
pub use functions::{rastrigin, sphere, ShiftSchedule};

use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::es::Objective;
use crate::nn::MlpSpec;
use crate::rng::{rng_from, stream_seed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Sphere,
    Rastrigin,
    ShiftedSphereNonstationary,
    PointMassNav,
    CartpoleSwingup,
}

impl TaskKind {
    pub fn is_control(self) -> bool {
        matches!(self, TaskKind::PointMassNav | TaskKind::CartpoleSwingup)
    }
}

/// Task section of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub kind: TaskKind,
    /// Dimension of the analytic tasks. Ignored by control tasks.
    pub dim: usize,
    /// Episode length of control tasks.
    pub horizon: usize,
    /// Iterations between optimum shifts of the nonstationary sphere.
    pub shift_every: u64,
    /// Per-coordinate standard deviation of the initial optimum and of each shift.
    pub shift_scale: f64,
    /// Half-width of the uniform box analytic tasks start from.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            kind: TaskKind::Sphere,
            dim: 20,
            horizon: 200,
            shift_every: 50,
            shift_scale: 0.5,
            init_scale: 5.0,
            seed: 0,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.kind.is_control() && self.dim == 0 {
            return Err(Error::Config("task.dim must be positive".into()));
        }
        if self.kind.is_control() && self.horizon == 0 {
            return Err(Error::Config("task.horizon must be positive".into()));
        }
        if self.kind == TaskKind::ShiftedSphereNonstationary && self.shift_every == 0 {
            return Err(Error::Config("task.shift_every must be positive".into()));
        }
        if !(self.shift_scale >= 0.0 && self.init_scale >= 0.0) {
            return Err(Error::Config("task scales must be non-negative".into()));
        }
        Ok(())
    }
}

/// A configured task, ready to evaluate parameter vectors.
#[derive(Debug)]
pub struct Task {
    config: TaskConfig,
    gamma: f64,
    body: Body,
}

#[derive(Debug)]
enum Body {
    Sphere,
    Rastrigin,
    Shifted(ShiftSchedule),
    PointMass(PointMassNav),
    Cartpole(CartpoleSwingup),
}

impl Task {
    pub fn new(config: TaskConfig, gamma: f64) -> Result<Self> {
        config.validate()?;
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        let body = match config.kind {
            TaskKind::Sphere => Body::Sphere,
            TaskKind::Rastrigin => Body::Rastrigin,
            TaskKind::ShiftedSphereNonstationary => Body::Shifted(ShiftSchedule::new(
                config.dim,
                config.shift_every,
                config.shift_scale,
                config.seed,
            )),
            TaskKind::PointMassNav => Body::PointMass(PointMassNav::new(config.horizon, gamma)),
            TaskKind::CartpoleSwingup => Body::Cartpole(CartpoleSwingup::new(config.horizon, gamma)),
        };
        Ok(Self { config, gamma, body })
    }

    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kind(&self) -> TaskKind {
        self.config.kind
    }

    /// Policy network of control tasks.
    pub fn policy(&self) -> Option<&MlpSpec> {
        match &self.body {
            Body::PointMass(p) => Some(p.policy()),
            Body::Cartpole(c) => Some(c.policy()),
            _ => None,
        }
    }

    pub fn param_dim(&self) -> usize {
        self.policy().map_or(self.config.dim, MlpSpec::param_count)
    }

    pub fn schedule(&self) -> Option<&ShiftSchedule> {
        match &self.body {
            Body::Shifted(s) => Some(s),
            _ => None,
        }
    }

    /// Starting parameters for a run with the given seed.
    pub fn initial_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(stream_seed(seed, Stream::Init, &[0]));
        match (&self.body, self.policy()) {
            (_, Some(policy)) => policy.init(&mut rng),
            (Body::Shifted(_), _) => vec![0.0; self.config.dim],
            _ => {
                let s = self.config.init_scale;
                if s == 0.0 {
                    return vec![0.0; self.config.dim];
                }
                let dist = Uniform::new_inclusive(-s, s).expect("finite scale");
                (0..self.config.dim).map(|_| dist.sample(&mut rng)).collect()
            }
        }
    }

    pub fn try_evaluate(&self, params: &[f64], iteration: u64) -> Result<f64> {
        if params.len() != self.param_dim() {
            return Err(Error::Config(format!(
                "task expects {} parameters, got {}",
                self.param_dim(),
                params.len()
            )));
        }
        Ok(self.evaluate(params, iteration))
    }
}

impl Objective for Task {
    fn evaluate(&self, params: &[f64], iteration: u64) -> f64 {
        match &self.body {
            Body::Sphere => sphere(params),
            Body::Rastrigin => rastrigin(params),
            Body::Shifted(s) => s.evaluate(params, iteration),
            Body::PointMass(p) => p.episode_return(params),
            Body::Cartpole(c) => c.episode_return(params),
        }
    }
}
