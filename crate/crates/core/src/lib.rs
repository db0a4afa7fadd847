//! Bilevel evolution strategies: an inner ES optimizes task parameters while
//! a meta level (a learned LSTM proposal model or Bayesian optimization)
//! adapts the inner noise scale and learning rate online.

pub mod envs;
pub mod error;
pub mod es;
pub mod harness;
pub mod hyper;
pub mod meta;
pub mod nn;
pub mod persist;
pub mod record;
pub mod rng;
pub mod run;

pub use error::{Error, Result};
pub use es::{EsConfig, Objective};
pub use hyper::{HyperParams, HyperSpace};
pub use record::RunRecord;
pub use run::{integrated_loop, Mode, Run, RunSetup, RunState};
