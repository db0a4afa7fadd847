use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::es::PopulationFitness;

/// The last `capacity` population fitness rows, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationReplayBuffer {
    capacity: usize,
    rows: VecDeque<PopulationFitness>,
    /// The only row is a stand-in from `prime` and goes away on the first push.
    #[serde(default)]
    placeholder: bool,
}

impl PopulationReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), rows: VecDeque::with_capacity(capacity), placeholder: false }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &PopulationFitness> {
        self.rows.iter()
    }

    /// Gives an empty buffer a constant stand-in row of `width` entries so a
    /// window exists before the first population is evaluated.
    pub fn prime(&mut self, width: usize, iteration: u64) {
        if self.rows.is_empty() {
            self.rows.push_back(PopulationFitness { values: vec![0.0; width], iteration });
            self.placeholder = true;
        }
    }

    pub fn push(&mut self, row: PopulationFitness) -> Result<()> {
        if self.placeholder && self.rows.back().is_some_and(|r| r.len() == row.len()) {
            self.rows.clear();
            self.placeholder = false;
        }
        if let Some(last) = self.rows.back() {
            if row.len() != last.len() {
                return Err(Error::Invariant(format!(
                    "replay row has {} entries, buffer holds rows of {}",
                    row.len(),
                    last.len()
                )));
            }
            if row.iteration < last.iteration {
                return Err(Error::Invariant(format!(
                    "replay row for iteration {} arrived after iteration {}",
                    row.iteration, last.iteration
                )));
            }
        }
        if self.rows.len() == self.capacity {
            self.rows.pop_front();
        }
        self.rows.push_back(row);
        Ok(())
    }

    /// Exactly `capacity` rows, oldest first. Until the buffer fills up the
    /// oldest row is repeated at the front.
    pub fn window(&self) -> Result<Vec<Vec<f64>>> {
        let oldest = self
            .rows
            .front()
            .ok_or_else(|| Error::State("replay buffer is empty".into()))?;
        let pad = self.capacity - self.rows.len();
        Ok(std::iter::repeat_n(&oldest.values, pad)
            .chain(self.rows.iter().map(|r| &r.values))
            .cloned()
            .collect())
    }

    /// `window()` z-scored over all entries (std floored at 1e-8), so the
    /// encoder sees the shape of recent progress and not the task's scale.
    pub fn normalized_window(&self) -> Result<Vec<Vec<f64>>> {
        let mut w = self.window()?;
        let count = w.iter().map(Vec::len).sum::<usize>().max(1) as f64;
        let mean = w.iter().flatten().sum::<f64>() / count;
        let var = w.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
        let sd = var.sqrt();
        for v in w.iter_mut().flatten() {
            *v = if sd > 1e-8 { (*v - mean) / sd } else { 0.0 };
        }
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(i: u64, v: f64) -> PopulationFitness {
        PopulationFitness { values: vec![v; 3], iteration: i }
    }

    #[test]
    fn cold_window_pads_with_oldest() {
        let mut b = PopulationReplayBuffer::new(4);
        assert!(matches!(b.window(), Err(Error::State(_))));
        b.push(row(0, 1.0)).unwrap();
        b.push(row(1, 2.0)).unwrap();
        let w = b.window().unwrap();
        assert_eq!(w.len(), 4);
        assert_eq!(w, vec![vec![1.0; 3], vec![1.0; 3], vec![1.0; 3], vec![2.0; 3]]);
    }

    #[test]
    fn warm_window_keeps_latest() {
        let mut b = PopulationReplayBuffer::new(3);
        for i in 0..7 {
            b.push(row(i, i as f64)).unwrap();
        }
        assert_eq!(b.len(), 3);
        let w = b.window().unwrap();
        assert_eq!(w, vec![vec![4.0; 3], vec![5.0; 3], vec![6.0; 3]]);
    }

    #[test]
    fn placeholder_is_replaced_by_first_row() {
        let mut b = PopulationReplayBuffer::new(3);
        b.prime(3, 0);
        assert_eq!(b.window().unwrap(), vec![vec![0.0; 3]; 3]);
        b.push(row(0, 4.0)).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.window().unwrap(), vec![vec![4.0; 3]; 3]);
    }

    #[test]
    fn normalized_window_ignores_offset_and_scale() {
        let mut a = PopulationReplayBuffer::new(2);
        let mut b = PopulationReplayBuffer::new(2);
        for i in 0..2u64 {
            let vals: Vec<f64> = (0..3).map(|j| (i * 3 + j) as f64).collect();
            a.push(PopulationFitness { values: vals.clone(), iteration: i }).unwrap();
            let shifted = vals.iter().map(|v| 4.0 * v - 1000.0).collect();
            b.push(PopulationFitness { values: shifted, iteration: i }).unwrap();
        }
        let (wa, wb) = (a.normalized_window().unwrap(), b.normalized_window().unwrap());
        for (x, y) in wa.iter().flatten().zip(wb.iter().flatten()) {
            assert!((x - y).abs() < 1e-12);
        }
        let mut c = PopulationReplayBuffer::new(2);
        c.push(row(0, -3.0)).unwrap();
        assert_eq!(c.normalized_window().unwrap(), vec![vec![0.0; 3]; 2]);
    }

    #[test]
    fn out_of_order_rows_rejected() {
        let mut b = PopulationReplayBuffer::new(3);
        b.push(row(5, 0.0)).unwrap();
        assert!(b.push(row(4, 0.0)).is_err());
        assert!(b.push(PopulationFitness { values: vec![0.0; 2], iteration: 6 }).is_err());
    }
}
