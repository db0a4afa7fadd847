//! Inner-level hyperparameters (noise scale σ and learning rate α) and the
//! intervals the meta level is allowed to move them in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters consumed by one inner ES step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub sigma: f64,
    pub alpha: f64,
}

impl HyperParams {
    pub const fn new(sigma: f64, alpha: f64) -> Self {
        Self { sigma, alpha }
    }
}

/// Open interval `(lo, hi)` for an adapted hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperRange {
    pub lo: f64,
    pub hi: f64,
}

impl HyperRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let range = Self { lo, hi };
        range.validate()?;
        Ok(range)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo >= self.hi {
            return Err(Error::Config(format!(
                "hyperparameter range requires lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Convex combination `lo (1 - u) + hi u`. The result is
    /// nudged off the endpoints when rounding (or a saturated sigmoid) would
    /// otherwise land on them.
    pub fn from_unit(&self, unit: f64) -> f64 {
        let v = self.lo * (1.0 - unit) + self.hi * unit;
        if v.is_nan() {
            self.midpoint()
        } else if v <= self.lo {
            self.lo.next_up()
        } else if v >= self.hi {
            self.hi.next_down()
        } else {
            v
        }
    }

    pub fn to_unit(&self, value: f64) -> f64 {
        ((value - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    pub fn contains_strictly(&self, value: f64) -> bool {
        self.lo < value && value < self.hi
    }
}

/// Whether a hyperparameter is held at a constant or adapted in a range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperSetting {
    Fixed(f64),
    Adapted(HyperRange),
}

impl HyperSetting {
    fn range(&self) -> Option<&HyperRange> {
        match self {
            HyperSetting::Adapted(r) => Some(r),
            HyperSetting::Fixed(_) => None,
        }
    }
}

/// The set of hyperparameters under meta-level control. Adapted entries are
/// ordered σ first, then α; that order fixes the generator's output layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperSpace {
    pub sigma: HyperSetting,
    pub alpha: HyperSetting,
}

impl Default for HyperSpace {
    fn default() -> Self {
        Self {
            sigma: HyperSetting::Adapted(HyperRange { lo: 0.01, hi: 0.10 }),
            alpha: HyperSetting::Adapted(HyperRange { lo: 0.016, hi: 0.024 }),
        }
    }
}

impl HyperSpace {
    pub fn validate(&self) -> Result<()> {
        for r in self.ranges() {
            r.validate()?;
        }
        if self.dim() == 0 {
            return Err(Error::Config("at least one hyperparameter must be adapted".into()));
        }
        Ok(())
    }

    pub fn ranges(&self) -> Vec<HyperRange> {
        [self.sigma.range(), self.alpha.range()].into_iter().flatten().copied().collect()
    }

    /// Number of adapted hyperparameters.
    pub fn dim(&self) -> usize {
        self.ranges().len()
    }

    /// Builds hyperparameters from already range-mapped adapted values.
    pub fn assemble(&self, adapted: &[f64]) -> Result<HyperParams> {
        if adapted.len() != self.dim() {
            return Err(Error::Invariant(format!(
                "expected {} adapted values, got {}",
                self.dim(),
                adapted.len()
            )));
        }
        let mut it = adapted.iter().copied();
        let mut take = |s: &HyperSetting| match s {
            HyperSetting::Fixed(v) => *v,
            HyperSetting::Adapted(_) => it.next().unwrap_or(f64::NAN),
        };
        let sigma = take(&self.sigma);
        let alpha = take(&self.alpha);
        Ok(HyperParams { sigma, alpha })
    }

    /// Maps a point of the unit cube `[0,1]^dim` to hyperparameters.
    pub fn from_unit(&self, unit: &[f64]) -> Result<HyperParams> {
        let ranges = self.ranges();
        if unit.len() != ranges.len() {
            return Err(Error::Invariant(format!(
                "expected {} unit coordinates, got {}",
                ranges.len(),
                unit.len()
            )));
        }
        let values: Vec<f64> = ranges.iter().zip(unit).map(|(r, &u)| r.from_unit(u)).collect();
        self.assemble(&values)
    }

    pub fn to_unit(&self, h: &HyperParams) -> Vec<f64> {
        let mut out = Vec::with_capacity(2);
        if let HyperSetting::Adapted(r) = &self.sigma {
            out.push(r.to_unit(h.sigma));
        }
        if let HyperSetting::Adapted(r) = &self.alpha {
            out.push(r.to_unit(h.alpha));
        }
        out
    }

    /// Range midpoints for adapted entries, fixed values otherwise.
    pub fn midpoint(&self) -> HyperParams {
        let mids: Vec<f64> = self.ranges().iter().map(HyperRange::midpoint).collect();
        self.assemble(&mids).expect("midpoint has one entry per range")
    }

    /// True when every adapted entry lies strictly inside its range.
    pub fn admits(&self, h: &HyperParams) -> bool {
        let ok = |s: &HyperSetting, v: f64| match s {
            HyperSetting::Fixed(f) => v == *f,
            HyperSetting::Adapted(r) => r.contains_strictly(v),
        };
        ok(&self.sigma, h.sigma) && ok(&self.alpha, h.alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_map_stays_strictly_inside() {
        let r = HyperRange::new(0.016, 0.024).unwrap();
        for u in [0.0, 1e-300, 0.5, 1.0 - 1e-17, 1.0] {
            assert!(r.contains_strictly(r.from_unit(u)), "u = {u}");
        }
        assert_eq!(r.from_unit(0.5), 0.02);
    }

    #[test]
    fn inverted_range_rejected() {
        assert!(HyperRange::new(0.1, 0.1).is_err());
        assert!(HyperRange::new(0.2, 0.1).is_err());
    }

    #[test]
    fn fixed_entries_pass_through() {
        let space = HyperSpace {
            sigma: HyperSetting::Adapted(HyperRange { lo: 0.01, hi: 0.1 }),
            alpha: HyperSetting::Fixed(0.0),
        };
        assert_eq!(space.dim(), 1);
        let h = space.from_unit(&[0.5]).unwrap();
        assert_eq!(h.alpha, 0.0);
        assert!((h.sigma - 0.055).abs() < 1e-15);
    }
}
