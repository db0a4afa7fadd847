use serde::{Deserialize, Serialize};

/// One row of a run log, written once per inner iteration.
///
/// `ret` is the unperturbed return of the parameters the iteration started
/// from; `sigma`/`alpha` are the hyperparameters that iteration used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub iteration: u64,
    #[serde(rename = "return")]
    pub ret: f64,
    pub pop_mean: f64,
    pub pop_max: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub inner_evals: u64,
    pub lookahead_evals: u64,
    /// Wall time of the iteration (meta work included). Not part of the
    /// deterministic CSV.
    #[serde(skip)]
    pub wall_ms: f64,
    pub seed: u64,
}

impl RunRecord {
    /// Equality on every deterministic field.
    pub fn same_outcome(&self, other: &RunRecord) -> bool {
        RunRecord { wall_ms: 0.0, ..self.clone() } == RunRecord { wall_ms: 0.0, ..other.clone() }
    }
}
