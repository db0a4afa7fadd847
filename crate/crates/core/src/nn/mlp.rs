use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{fill_uniform, Activation};
use crate::error::{Error, Result};

/// Fully connected network. Parameters are stored layer by layer, each layer
/// as its `fan_out x fan_in` weight matrix (row-major) followed by its
/// `fan_out` biases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl MlpSpec {
    /// The inner-level policy: two 64-unit tanh hidden layers.
    pub fn policy(obs_dim: usize, act_dim: usize, output_activation: Activation) -> Self {
        Self {
            input_dim: obs_dim,
            hidden_dims: vec![64, 64],
            output_dim: act_dim,
            hidden_activation: Activation::Tanh,
            output_activation,
        }
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_dims.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden_dims);
        w.push(self.output_dim);
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    /// Weights and biases uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = vec![0.0; self.param_count()];
        let mut offset = 0;
        for w in self.widths().windows(2) {
            let len = (w[0] + 1) * w[1];
            fill_uniform(&mut params[offset..offset + len], 1.0 / (w[0] as f64).sqrt(), rng);
            offset += len;
        }
        params
    }
}

pub fn mlp_forward(spec: &MlpSpec, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if params.len() != spec.param_count() {
        return Err(Error::Invariant(format!(
            "MLP expects {} parameters, got {}",
            spec.param_count(),
            params.len()
        )));
    }
    if x.len() != spec.input_dim {
        return Err(Error::Invariant(format!(
            "MLP expects input of length {}, got {}",
            spec.input_dim,
            x.len()
        )));
    }
    let widths = spec.widths();
    let layers = widths.len() - 1;
    let mut act = x.to_vec();
    let mut offset = 0;
    for (l, w) in widths.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weights = &params[offset..offset + fan_in * fan_out];
        let biases = &params[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
        offset += (fan_in + 1) * fan_out;
        let activation =
            if l + 1 == layers { spec.output_activation } else { spec.hidden_activation };
        act = weights
            .chunks_exact(fan_in)
            .zip(biases)
            .map(|(row, b)| {
                let z = row.iter().zip(&act).fold(*b, |acc, (w, a)| acc + w * a);
                activation.apply(z)
            })
            .collect();
    }
    Ok(act)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(out: Activation) -> MlpSpec {
        MlpSpec {
            input_dim: 3,
            hidden_dims: vec![4],
            output_dim: 2,
            hidden_activation: Activation::Tanh,
            output_activation: out,
        }
    }

    #[test]
    fn param_count_matches_layout() {
        assert_eq!(tiny(Activation::Identity).param_count(), 4 * 4 + 5 * 2);
        assert_eq!(MlpSpec::policy(4, 2, Activation::Tanh).param_count(), 5 * 64 + 65 * 64 + 65 * 2);
    }

    #[test]
    fn zero_params() {
        let spec = tiny(Activation::Identity);
        let zeros = vec![0.0; spec.param_count()];
        assert_eq!(mlp_forward(&spec, &zeros, &[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
        let spec = tiny(Activation::Sigmoid);
        assert_eq!(mlp_forward(&spec, &zeros, &[1.0, -2.0, 3.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn one_one_one_net() {
        let spec = MlpSpec {
            input_dim: 1,
            hidden_dims: vec![1],
            output_dim: 1,
            hidden_activation: Activation::Tanh,
            output_activation: Activation::Identity,
        };
        // w1, b1, w2, b2
        assert_eq!(mlp_forward(&spec, &[1.0, 0.0, 1.0, 0.0], &[0.0]).unwrap(), vec![0.0]);
        let y = mlp_forward(&spec, &[1.0, 0.0, 1.0, 0.0], &[0.5]).unwrap();
        assert_eq!(y, vec![0.5f64.tanh()]);
    }

    #[test]
    fn dimension_mismatch() {
        let spec = tiny(Activation::Identity);
        let p = vec![0.0; spec.param_count()];
        assert!(matches!(mlp_forward(&spec, &p, &[1.0]), Err(Error::Invariant(_))));
        assert!(matches!(mlp_forward(&spec, &p[1..], &[1.0, 2.0, 3.0]), Err(Error::Invariant(_))));
    }
}
