use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{lstm_forward, mlp_forward, Activation, LstmSpec, MlpSpec};
use crate::error::{Error, Result};
use crate::hyper::HyperRange;

/// Hidden width of the hyperparameter generator.
pub const GENERATOR_HIDDEN: usize = 32;

/// Meta-level model: LSTM encoder ψ followed by a sigmoid-output MLP
/// generator φ. `params` is the concatenation `[ψ, φ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    pub encoder: LstmSpec,
    pub generator: MlpSpec,
    params: Vec<f64>,
}

impl MetaModel {
    pub fn generator_spec(hidden_dim: usize, outputs: usize) -> MlpSpec {
        MlpSpec {
            input_dim: hidden_dim,
            hidden_dims: vec![GENERATOR_HIDDEN],
            output_dim: outputs,
            hidden_activation: Activation::Tanh,
            output_activation: Activation::Sigmoid,
        }
    }

    pub fn init<R: Rng>(encoder: LstmSpec, outputs: usize, rng: &mut R) -> Self {
        let generator = Self::generator_spec(encoder.hidden_dim, outputs);
        let mut params = encoder.init(rng);
        params.extend(generator.init(rng));
        Self { encoder, generator, params }
    }

    pub fn zeros(encoder: LstmSpec, outputs: usize) -> Self {
        let generator = Self::generator_spec(encoder.hidden_dim, outputs);
        let params = vec![0.0; encoder.param_count() + generator.param_count()];
        Self { encoder, generator, params }
    }

    /// Rebuilds a model from a flat parameter vector.
    pub fn from_flat(encoder: LstmSpec, generator: MlpSpec, params: Vec<f64>) -> Result<Self> {
        if generator.input_dim != encoder.hidden_dim {
            return Err(Error::Invariant(format!(
                "generator input {} does not match encoder hidden {}",
                generator.input_dim, encoder.hidden_dim
            )));
        }
        let expected = encoder.param_count() + generator.param_count();
        if params.len() != expected {
            return Err(Error::Invariant(format!(
                "meta model expects {expected} parameters, got {}",
                params.len()
            )));
        }
        Ok(Self { encoder, generator, params })
    }

    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        Self::from_flat(self.encoder, self.generator.clone(), params)
    }

    pub fn flat(&self) -> &[f64] {
        &self.params
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn encoder_params(&self) -> &[f64] {
        &self.params[..self.encoder.param_count()]
    }

    pub fn generator_params(&self) -> &[f64] {
        &self.params[self.encoder.param_count()..]
    }

    /// Hex SHA-256 of the architecture. Two models with equal hashes accept
    /// each other's parameter vectors.
    pub fn spec_hash(&self) -> String {
        let text = format!(
            "lstm:n={},h={},k={};gen:{}->{:?}->{}:{:?}/{:?}",
            self.encoder.input_dim,
            self.encoder.hidden_dim,
            self.encoder.seq_len,
            self.generator.input_dim,
            self.generator.hidden_dims,
            self.generator.output_dim,
            self.generator.hidden_activation,
            self.generator.output_activation,
        );
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `X = ψ(S)` followed by `φ(X)` mapped into `ranges`.
    pub fn forward(&self, window: &[Vec<f64>], ranges: &[HyperRange]) -> Result<Vec<f64>> {
        let encoded = lstm_forward(&self.encoder, self.encoder_params(), window)?;
        generator_forward(&self.generator, self.generator_params(), &encoded, ranges)
    }
}

/// Generator outputs `o_j` in (0, 1) mapped to `lo_j + o_j (hi_j - lo_j)`.
pub fn generator_forward(
    spec: &MlpSpec,
    params: &[f64],
    encoded: &[f64],
    ranges: &[HyperRange],
) -> Result<Vec<f64>> {
    if ranges.len() != spec.output_dim {
        return Err(Error::Config(format!(
            "generator has {} outputs but {} ranges were given",
            spec.output_dim,
            ranges.len()
        )));
    }
    for r in ranges {
        r.validate()?;
    }
    let unit = mlp_forward(spec, params, encoded)?;
    Ok(unit.iter().zip(ranges).map(|(&o, r)| r.from_unit(o)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn ranges() -> Vec<HyperRange> {
        vec![HyperRange { lo: 0.01, hi: 0.10 }, HyperRange { lo: 0.016, hi: 0.024 }]
    }

    #[test]
    fn zero_generator_gives_midpoints() {
        let spec = MetaModel::generator_spec(8, 2);
        let out =
            generator_forward(&spec, &vec![0.0; spec.param_count()], &[0.3; 8], &ranges()).unwrap();
        assert_eq!(out, vec![0.055, 0.02]);
    }

    #[test]
    fn output_monotone_in_preactivation() {
        // one-input, no-hidden-effect generator: drive the output bias
        let spec = MetaModel::generator_spec(1, 1);
        let range = [HyperRange { lo: 0.0, hi: 0.1 }];
        let bias_idx = spec.param_count() - 1;
        let mut prev = f64::NEG_INFINITY;
        for step in -400..=400 {
            let mut p = vec![0.0; spec.param_count()];
            p[bias_idx] = step as f64 * 0.1;
            let v = generator_forward(&spec, &p, &[0.0], &range).unwrap()[0];
            assert!(v >= prev);
            assert!(v > 0.0 && v < 0.1);
            prev = v;
        }
        assert!((0.1 - prev) < 1e-12);
    }

    #[test]
    fn bad_ranges_rejected() {
        let spec = MetaModel::generator_spec(2, 1);
        let p = vec![0.0; spec.param_count()];
        let bad = [HyperRange { lo: 0.1, hi: 0.1 }];
        assert!(matches!(generator_forward(&spec, &p, &[0.0; 2], &bad), Err(Error::Config(_))));
        assert!(matches!(generator_forward(&spec, &p, &[0.0; 2], &ranges()), Err(Error::Config(_))));
    }

    #[test]
    fn flat_round_trip_and_hash() {
        let enc = LstmSpec { input_dim: 5, hidden_dim: 4, seq_len: 3 };
        let m = MetaModel::init(enc, 2, &mut rng_from(3));
        let back = MetaModel::from_flat(m.encoder, m.generator.clone(), m.flat().to_vec()).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.encoder_params().len() + m.generator_params().len(), m.len());
        let other = MetaModel::init(LstmSpec { input_dim: 6, ..enc }, 2, &mut rng_from(3));
        assert_ne!(m.spec_hash(), other.spec_hash());
        assert_eq!(m.spec_hash(), MetaModel::zeros(enc, 2).spec_hash());
    }
}
