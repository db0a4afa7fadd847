//! Small deterministic control tasks driven by the inner-level MLP policy.

use crate::nn::{mlp_forward, Activation, MlpSpec};

const GOAL: [f64; 2] = [1.0, 1.0];

/// Planar double integrator that must reach a fixed goal from the origin.
/// Reward per step is the negative distance to the goal.
#[derive(Debug, Clone)]
pub struct PointMassNav {
    horizon: usize,
    gamma: f64,
    policy: MlpSpec,
}

impl PointMassNav {
    pub const DT: f64 = 0.1;

    pub fn new(horizon: usize, gamma: f64) -> Self {
        Self { horizon, gamma, policy: MlpSpec::policy(4, 2, Activation::Tanh) }
    }

    pub fn policy(&self) -> &MlpSpec {
        &self.policy
    }

    pub fn goal(&self) -> [f64; 2] {
        GOAL
    }

    pub fn episode_return(&self, params: &[f64]) -> f64 {
        let mut pos = [0.0f64; 2];
        let mut vel = [0.0f64; 2];
        let mut ret = 0.0;
        let mut discount = 1.0;
        for _ in 0..self.horizon {
            let obs = [pos[0] - GOAL[0], pos[1] - GOAL[1], vel[0], vel[1]];
            let act = match mlp_forward(&self.policy, params, &obs) {
                Ok(a) => a,
                Err(_) => return f64::NAN,
            };
            for d in 0..2 {
                vel[d] += act[d].clamp(-1.0, 1.0) * Self::DT;
                pos[d] += vel[d] * Self::DT;
            }
            let dist = ((pos[0] - GOAL[0]).powi(2) + (pos[1] - GOAL[1]).powi(2)).sqrt();
            ret -= discount * dist;
            discount *= self.gamma;
        }
        ret
    }
}

/// Cart-pole swing-up with a continuous force. The pole starts hanging down;
/// reward per step is `(1 + cos φ) / 2` (1 when upright). Leaving the track
/// ends the episode.
#[derive(Debug, Clone)]
pub struct CartpoleSwingup {
    horizon: usize,
    gamma: f64,
    policy: MlpSpec,
}

impl CartpoleSwingup {
    const GRAVITY: f64 = 9.8;
    const CART_MASS: f64 = 1.0;
    const POLE_MASS: f64 = 0.1;
    const HALF_LENGTH: f64 = 0.5;
    const FORCE: f64 = 10.0;
    const DT: f64 = 0.05;
    const TRACK: f64 = 3.0;

    pub fn new(horizon: usize, gamma: f64) -> Self {
        Self { horizon, gamma, policy: MlpSpec::policy(5, 1, Activation::Tanh) }
    }

    pub fn policy(&self) -> &MlpSpec {
        &self.policy
    }

    /// Returns the discounted return and the number of steps taken.
    pub fn rollout(&self, params: &[f64]) -> (f64, usize) {
        let total_mass = Self::CART_MASS + Self::POLE_MASS;
        let pole_ml = Self::POLE_MASS * Self::HALF_LENGTH;
        let (mut x, mut x_dot, mut phi, mut phi_dot) = (0.0f64, 0.0f64, std::f64::consts::PI, 0.0f64);
        let mut ret = 0.0;
        let mut discount = 1.0;
        for step in 0..self.horizon {
            let obs = [x, x_dot, phi.cos(), phi.sin(), phi_dot];
            let u = match mlp_forward(&self.policy, params, &obs) {
                Ok(a) => a[0].clamp(-1.0, 1.0),
                Err(_) => return (f64::NAN, step),
            };
            let force = Self::FORCE * u;
            let (sin, cos) = phi.sin_cos();
            let temp = (force + pole_ml * phi_dot * phi_dot * sin) / total_mass;
            let phi_acc = (Self::GRAVITY * sin - cos * temp)
                / (Self::HALF_LENGTH * (4.0 / 3.0 - Self::POLE_MASS * cos * cos / total_mass));
            let x_acc = temp - pole_ml * phi_acc * cos / total_mass;
            x += Self::DT * x_dot;
            x_dot += Self::DT * x_acc;
            phi += Self::DT * phi_dot;
            phi_dot += Self::DT * phi_acc;
            if x.abs() > Self::TRACK {
                return (ret, step + 1);
            }
            ret += discount * 0.5 * (1.0 + phi.cos());
            discount *= self.gamma;
        }
        (ret, self.horizon)
    }

    pub fn episode_return(&self, params: &[f64]) -> f64 {
        self.rollout(params).0
    }
}
