use std::f64::consts::PI;
use std::sync::RwLock;

use rand_distr::{Distribution, Normal};

use crate::rng::{rng_from, stream_seed, Stream};

/// `-‖x‖²`, maximized at the origin.
pub fn sphere(x: &[f64]) -> f64 {
    -x.iter().map(|v| v * v).sum::<f64>()
}

/// Negated Rastrigin, maximized at the origin with value 0.
pub fn rastrigin(x: &[f64]) -> f64 {
    -x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos() + 10.0).sum::<f64>()
}

/// Optimum trajectory of the nonstationary sphere. The optimum holds still
/// for `every` iterations, then jumps by a seeded Gaussian offset.
#[derive(Debug)]
pub struct ShiftSchedule {
    dim: usize,
    every: u64,
    scale: f64,
    seed: u64,
    targets: RwLock<Vec<Vec<f64>>>,
}

impl ShiftSchedule {
    pub fn new(dim: usize, every: u64, scale: f64, seed: u64) -> Self {
        let first = Self::draw(dim, scale, seed, 0);
        Self { dim, every, scale, seed, targets: RwLock::new(vec![first]) }
    }

    fn draw(dim: usize, scale: f64, seed: u64, phase: u64) -> Vec<f64> {
        let mut rng = rng_from(stream_seed(seed, Stream::Task, &[phase]));
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        (0..dim).map(|_| scale * normal.sample(&mut rng)).collect()
    }

    pub fn phase(&self, iteration: u64) -> u64 {
        iteration / self.every
    }

    pub fn every(&self) -> u64 {
        self.every
    }

    /// Optimum location in effect at `iteration`.
    pub fn shift_optimum(&self, iteration: u64) -> Vec<f64> {
        let phase = self.phase(iteration) as usize;
        if let Some(t) = self.targets.read().expect("schedule lock").get(phase) {
            return t.clone();
        }
        let mut targets = self.targets.write().expect("schedule lock");
        while targets.len() <= phase {
            let p = targets.len() as u64;
            let delta = Self::draw(self.dim, self.scale, self.seed, p);
            let next = targets[targets.len() - 1].iter().zip(&delta).map(|(c, d)| c + d).collect();
            targets.push(next);
        }
        targets[phase].clone()
    }

    pub fn evaluate(&self, x: &[f64], iteration: u64) -> f64 {
        let c = self.shift_optimum(iteration);
        -x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimum_constant_within_phase() {
        let s = ShiftSchedule::new(4, 50, 0.5, 9);
        let first = s.shift_optimum(0);
        for t in 1..50 {
            assert_eq!(s.shift_optimum(t), first);
        }
        assert_ne!(s.shift_optimum(50), first);
    }

    #[test]
    fn schedule_reproducible() {
        let a = ShiftSchedule::new(3, 10, 1.0, 2);
        let b = ShiftSchedule::new(3, 10, 1.0, 2);
        // query out of order on one of them
        let _ = b.shift_optimum(95);
        for t in (0..100).step_by(10) {
            assert_eq!(a.shift_optimum(t), b.shift_optimum(t));
        }
    }

    #[test]
    fn old_optimum_loses_squared_shift() {
        let s = ShiftSchedule::new(5, 20, 0.7, 4);
        let old = s.shift_optimum(19);
        let new = s.shift_optimum(20);
        let delta2: f64 = old.iter().zip(&new).map(|(a, b)| (b - a) * (b - a)).sum();
        assert_eq!(s.evaluate(&old, 19), 0.0);
        assert!((s.evaluate(&old, 20) + delta2).abs() <= 1e-12 * delta2.max(1.0));
    }
}
