//! Finite bid grids for deviation search and the seeded profile sampler.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MechError, Result};
use crate::types::BidProfile;

/// `lo, lo+step, …, hi`, always augmented with 0, `hi`, the bids of the
/// profile under test and any extra points in `augment_with`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    #[serde(default)]
    pub augment_with: Vec<f64>,
}

impl Default for SearchGrid {
    fn default() -> Self {
        SearchGrid::new(0.0, 10.0, 0.5).expect("default grid is valid")
    }
}

impl SearchGrid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let grid = SearchGrid {
            lo,
            hi,
            step,
            augment_with: Vec::new(),
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo >= 0.0 && self.lo <= self.hi) {
            return Err(MechError::InvalidParameter {
                name: "grid",
                reason: format!("need 0 <= lo <= hi, got lo={} hi={}", self.lo, self.hi),
            });
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(MechError::InvalidParameter {
                name: "grid",
                reason: format!("step must be positive, got {}", self.step),
            });
        }
        if let Some(bad) = self
            .augment_with
            .iter()
            .find(|x| !(x.is_finite() && **x >= 0.0))
        {
            return Err(MechError::InvalidParameter {
                name: "grid",
                reason: format!("augmentation point {bad} is not a valid bid"),
            });
        }
        Ok(())
    }

    pub fn with_augment(mut self, points: impl IntoIterator<Item = f64>) -> Self {
        self.augment_with.extend(points);
        self
    }

    /// The regular points `lo + k·step` (k ≥ 0) that do not exceed `hi`.
    pub fn base_points(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=count)
            .map(|k| self.lo + k as f64 * self.step)
            .collect()
    }

    /// Grid without the regular spacing doing any work: one distinct point.
    pub fn is_degenerate(&self) -> bool {
        self.base_points().len() < 2
    }

    /// Sorted, deduplicated search points for `profile`.
    pub fn points_for(&self, profile: &BidProfile) -> Vec<f64> {
        let mut pts = self.base_points();
        pts.push(0.0);
        pts.push(self.hi);
        pts.extend(self.augment_with.iter().copied());
        pts.extend(profile.bids());
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        pts
    }

    /// Points within `[0, upper]` (plus `upper` itself).
    pub fn points_up_to(&self, upper: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .base_points()
            .into_iter()
            .chain(self.augment_with.iter().copied())
            .chain([0.0, upper])
            .filter(|&x| x <= upper)
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        pts
    }
}

impl fmt::Display for SearchGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.step)?;
        if !self.augment_with.is_empty() {
            write!(f, " +{:?}", self.augment_with)?;
        }
        Ok(())
    }
}

impl FromStr for SearchGrid {
    type Err = MechError;

    /// Parses `lo:hi:step`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = |reason: String| MechError::InvalidParameter {
            name: "grid",
            reason,
        };
        if parts.len() != 3 {
            return Err(bad(format!("expected lo:hi:step, got `{s}`")));
        }
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("`{p}` is not a number: {e}")))
        };
        SearchGrid::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }
}

/// Seeded generator of bid profiles with `n_min..=n_max` agents and bids
/// drawn from a grid's regular points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSampler {
    pub n_min: usize,
    pub n_max: usize,
    pub grid: SearchGrid,
    pub seed: u64,
}

impl ProfileSampler {
    pub fn new(n_min: usize, n_max: usize, grid: SearchGrid, seed: u64) -> Result<Self> {
        if n_min < 1 || n_min > n_max {
            return Err(MechError::InvalidParameter {
                name: "n_range",
                reason: format!("need 1 <= n_min <= n_max, got {n_min}..{n_max}"),
            });
        }
        grid.validate()?;
        Ok(ProfileSampler {
            n_min,
            n_max,
            grid,
            seed,
        })
    }

    pub fn sample(&self, budget: usize) -> Vec<BidProfile> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let points = self.grid.base_points();
        (0..budget)
            .map(|_| {
                let n = rng.gen_range(self.n_min..=self.n_max);
                let bids: Vec<f64> = (0..n)
                    .map(|_| points[rng.gen_range(0..points.len())])
                    .collect();
                BidProfile::from_bids(&bids).expect("grid points are valid bids")
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_points_are_exact_multiples() {
        let g = SearchGrid::new(0.0, 10.0, 0.5).unwrap();
        let pts = g.base_points();
        assert_eq!(pts.len(), 21);
        assert_eq!(pts[20], 10.0);
        assert_eq!(pts[7], 3.5);
    }

    #[test]
    fn points_include_profile_bids_zero_and_hi() {
        let g = SearchGrid::new(1.0, 3.0, 1.0).unwrap().with_augment([7.25]);
        let p = BidProfile::from_bids(&[2.5, 1.0]).unwrap();
        assert_eq!(g.points_for(&p), vec![0.0, 1.0, 2.0, 2.5, 3.0, 7.25]);
    }

    #[test]
    fn parse_grid() {
        let g: SearchGrid = "0:10:0.25".parse().unwrap();
        assert_eq!((g.lo, g.hi, g.step), (0.0, 10.0, 0.25));
        assert!("0:10".parse::<SearchGrid>().is_err());
        assert!("0:10:0".parse::<SearchGrid>().is_err());
        assert!("5:1:1".parse::<SearchGrid>().is_err());
        assert!("a:1:1".parse::<SearchGrid>().is_err());
    }

    #[test]
    fn degenerate_grid() {
        assert!(SearchGrid::new(3.0, 3.0, 1.0).unwrap().is_degenerate());
        assert!(!SearchGrid::default().is_degenerate());
    }

    #[test]
    fn sampler_is_deterministic() {
        let s = ProfileSampler::new(2, 5, SearchGrid::default(), 42).unwrap();
        let a = s.sample(50);
        let b = s.sample(50);
        assert_eq!(a, b);
        assert!(a.iter().all(|p| (2..=5).contains(&p.len())));
        let other = ProfileSampler { seed: 43, ..s }.sample(50);
        assert_ne!(a, other);
    }
}
