use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{fill_uniform, sigmoid};
use crate::error::{Error, Result};

/// LSTM encoder over a `seq_len x input_dim` sequence.
///
/// Flat layout: input weights `W` (`4h x n`, row-major), recurrent weights
/// `U` (`4h x h`), then biases `b` (`4h`). Within each block the gate order
/// is input, forget, candidate, output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub seq_len: usize,
}

impl LstmSpec {
    pub fn param_count(&self) -> usize {
        4 * self.hidden_dim * (self.input_dim + self.hidden_dim + 1)
    }

    /// Uniform in `[-1/sqrt(h), 1/sqrt(h)]`, forget-gate bias set to 1.
    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let h = self.hidden_dim;
        let mut params = vec![0.0; self.param_count()];
        fill_uniform(&mut params, 1.0 / (h as f64).sqrt(), rng);
        let bias = 4 * h * (self.input_dim + h);
        params[bias + h..bias + 2 * h].fill(1.0);
        params
    }
}

/// Runs the recurrence from zero state over exactly `seq_len` rows and
/// returns the final hidden state.
pub fn lstm_forward(spec: &LstmSpec, params: &[f64], sequence: &[Vec<f64>]) -> Result<Vec<f64>> {
    if sequence.len() != spec.seq_len {
        return Err(Error::Invariant(format!(
            "LSTM expects {} rows, got {}",
            spec.seq_len,
            sequence.len()
        )));
    }
    if params.len() != spec.param_count() {
        return Err(Error::Invariant(format!(
            "LSTM expects {} parameters, got {}",
            spec.param_count(),
            params.len()
        )));
    }
    if let Some(row) = sequence.iter().find(|r| r.len() != spec.input_dim) {
        return Err(Error::Invariant(format!(
            "LSTM rows must have length {}, got {}",
            spec.input_dim,
            row.len()
        )));
    }

    Ok(hidden_states(spec, params, sequence).pop().unwrap_or_else(|| vec![0.0; spec.hidden_dim]))
}

/// Hidden state after every row. Dimensions are assumed checked.
fn hidden_states(spec: &LstmSpec, params: &[f64], sequence: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, h) = (spec.input_dim, spec.hidden_dim);
    let w = &params[..4 * h * n];
    let u = &params[4 * h * n..4 * h * (n + h)];
    let b = &params[4 * h * (n + h)..];

    let mut hidden = vec![0.0; h];
    let mut cell = vec![0.0; h];
    let mut gates = vec![0.0; 4 * h];
    let mut states = Vec::with_capacity(sequence.len());
    for x in sequence {
        for (r, z) in gates.iter_mut().enumerate() {
            let wx: f64 = w[r * n..(r + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
            let uh: f64 = u[r * h..(r + 1) * h].iter().zip(&hidden).map(|(a, b)| a * b).sum();
            *z = wx + uh + b[r];
        }
        for j in 0..h {
            let i = sigmoid(gates[j]);
            let f = sigmoid(gates[h + j]);
            let g = gates[2 * h + j].tanh();
            let o = sigmoid(gates[3 * h + j]);
            cell[j] = f * cell[j] + i * g;
            hidden[j] = o * cell[j].tanh();
        }
        states.push(hidden.clone());
    }
    states
}
