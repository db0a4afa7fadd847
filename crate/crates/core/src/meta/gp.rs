//! Zero-mean Gaussian-process regression with a squared-exponential kernel.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquaredExponential {
    pub length_scale: f64,
    pub signal_variance: f64,
}

impl SquaredExponential {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.signal_variance * (-0.5 * d2 / (self.length_scale * self.length_scale)).exp()
    }
}

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    kernel: SquaredExponential,
    xs: Vec<Vec<f64>>,
    lower: DMatrix<f64>,
    weights: DVector<f64>,
    jitter: f64,
}

impl GaussianProcess {
    /// Fits the posterior to `(xs, ys)`. The diagonal carries `noise_variance`
    /// plus a jitter that starts at 1e-8 and grows tenfold until the
    /// Cholesky factorization succeeds or 1e-4 is exceeded.
    pub fn fit(
        xs: Vec<Vec<f64>>,
        ys: &[f64],
        kernel: SquaredExponential,
        noise_variance: f64,
    ) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::Invariant(format!(
                "GP needs matching non-empty inputs, got {} points and {} targets",
                xs.len(),
                ys.len()
            )));
        }
        let n = xs.len();
        let gram = DMatrix::from_fn(n, n, |i, j| kernel.eval(&xs[i], &xs[j]));
        let mut jitter = JITTER_START;
        loop {
            let mut k = gram.clone();
            for i in 0..n {
                k[(i, i)] += noise_variance + jitter;
            }
            if let Some(chol) = k.cholesky() {
                let weights = chol.solve(&DVector::from_column_slice(ys));
                let lower = chol.unpack();
                return Ok(Self { kernel, xs, lower, weights, jitter });
            }
            jitter *= 10.0;
            if jitter > JITTER_MAX * (1.0 + 1e-9) {
                return Err(Error::Numerical(
                    "kernel matrix not positive definite at maximum jitter".into(),
                ));
            }
        }
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Posterior mean and variance at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let kx = DVector::from_iterator(self.xs.len(), self.xs.iter().map(|p| self.kernel.eval(p, x)));
        let mean = kx.dot(&self.weights);
        let v = self
            .lower
            .solve_lower_triangular(&kx)
            .expect("Cholesky factor has a positive diagonal");
        let var = (self.kernel.signal_variance - v.dot(&v)).max(0.0);
        (mean, var)
    }
}

/// Expected improvement over `best` for a maximization problem.
pub fn expected_improvement(mean: f64, variance: f64, best: f64) -> f64 {
    let sd = variance.max(0.0).sqrt();
    let gain = mean - best;
    if sd < 1e-12 {
        return gain.max(0.0);
    }
    let z = gain / sd;
    let unit = Normal::standard();
    (gain * unit.cdf(z) + sd * unit.pdf(z)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: SquaredExponential = SquaredExponential { length_scale: 0.2, signal_variance: 1.0 };

    #[test]
    fn interpolates_single_point() {
        let gp = GaussianProcess::fit(vec![vec![0.3, 0.7]], &[1.7], K, 0.0).unwrap();
        let (m, v) = gp.predict(&[0.3, 0.7]);
        assert!((m - 1.7).abs() < 1e-6);
        assert!(v <= 1e-7, "variance {v}");
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let gp = GaussianProcess::fit(vec![vec![0.0]], &[2.0], K, 1e-6).unwrap();
        let (m, v) = gp.predict(&[10.0]);
        assert!(m.abs() < 1e-12);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_observations_cancel_at_midpoint() {
        let gp = GaussianProcess::fit(vec![vec![0.2], vec![0.6]], &[0.8, -0.8], K, 1e-6).unwrap();
        let (m, _) = gp.predict(&[0.4]);
        assert!(m.abs() < 1e-12);
    }

    #[test]
    fn duplicate_points_need_jitter_but_fit() {
        let xs = vec![vec![0.5]; 4];
        let gp = GaussianProcess::fit(xs, &[1.0; 4], K, 0.0).unwrap();
        assert!(gp.jitter() >= 1e-8);
    }

    #[test]
    fn expected_improvement_edges() {
        assert_eq!(expected_improvement(0.5, 0.0, 1.0), 0.0);
        assert_eq!(expected_improvement(1.5, 0.0, 1.0), 0.5);
        assert!(expected_improvement(0.0, 1.0, 0.0) > 0.39);
        assert!(expected_improvement(-40.0, 1e-4, 0.0) >= 0.0);
    }
}
