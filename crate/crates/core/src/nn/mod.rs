//! Forward-only networks with flat parameter vectors.
//!
//! Both levels are trained by perturbing flat parameter vectors, so the
//! networks here only need a forward pass and a fixed, documented layout.

mod lstm;
mod meta_model;
mod mlp;

pub use lstm::{lstm_forward, LstmSpec};
pub use meta_model::{generator_forward, MetaModel, GENERATOR_HIDDEN};
pub use mlp::{mlp_forward, MlpSpec};

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn fill_uniform<R: Rng>(out: &mut [f64], bound: f64, rng: &mut R) {
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    for v in out {
        *v = dist.sample(rng);
    }
}
