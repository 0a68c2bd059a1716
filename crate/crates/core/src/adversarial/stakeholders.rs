use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedStream;

/// Per-stakeholder unsafe subsets of a behaviour space `0..behaviors`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakeholderSet {
    pub behaviors: u64,
    pub unsafe_sets: Vec<Vec<u64>>,
}

impl StakeholderSet {
    pub fn new(behaviors: u64, unsafe_sets: Vec<Vec<u64>>) -> Result<Self> {
        let s = Self {
            behaviors,
            unsafe_sets,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.behaviors == 0 {
            return Err(Error::invalid("behaviors", "must be at least 1"));
        }
        if let Some(b) = self.unsafe_sets.iter().flatten().find(|&&b| b >= self.behaviors) {
            return Err(Error::invalid(
                "unsafe_sets",
                format!("behaviour {b} outside 0..{}", self.behaviors),
            ));
        }
        Ok(())
    }

    /// `count` stakeholders, each declaring a uniformly random subset of
    /// `round(fraction * behaviors)` behaviours unsafe.
    pub fn random(count: usize, behaviors: u64, fraction: f64, seed: &SeedStream) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::invalid("fraction", "must lie in [0, 1]"));
        }
        let b = usize::try_from(behaviors).map_err(|_| Error::invalid("behaviors", "too large"))?;
        let k = (fraction * behaviors as f64).round() as usize;
        let unsafe_sets = (0..count)
            .map(|j| {
                let mut v: Vec<u64> = sample(&mut seed.rng(j as u64), b, k)
                    .into_iter()
                    .map(|i| i as u64)
                    .collect();
                v.sort_unstable();
                v
            })
            .collect();
        Self::new(behaviors, unsafe_sets)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageStep {
    pub stakeholders: usize,
    pub covered: u64,
    pub safe_remaining: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub behaviors: u64,
    pub covered: u64,
    pub coverage: f64,
    pub fully_covered: bool,
    /// Coverage after adding stakeholders one at a time.
    pub incremental: Vec<CoverageStep>,
}

/// Exact `|union of unsafe sets| / B`.
pub fn stakeholder_union_coverage(set: &StakeholderSet) -> Result<CoverageReport> {
    set.validate()?;
    let mut bits = vec![0u64; set.behaviors.div_ceil(64) as usize];
    let mut covered = 0u64;
    let mut incremental = Vec::with_capacity(set.unsafe_sets.len());
    for (j, s) in set.unsafe_sets.iter().enumerate() {
        for &b in s {
            let (w, m) = ((b / 64) as usize, 1u64 << (b % 64));
            if bits[w] & m == 0 {
                bits[w] |= m;
                covered += 1;
            }
        }
        incremental.push(CoverageStep {
            stakeholders: j + 1,
            covered,
            safe_remaining: set.behaviors - covered,
        });
    }
    Ok(CoverageReport {
        behaviors: set.behaviors,
        covered,
        coverage: covered as f64 / set.behaviors as f64,
        fully_covered: covered == set.behaviors,
        incremental,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complementary_halves_cover_everything() {
        let s = StakeholderSet::new(10, vec![(0..5).collect(), (5..10).collect()]).unwrap();
        let r = stakeholder_union_coverage(&s).unwrap();
        assert!(r.fully_covered);
        assert_eq!(r.coverage, 1.0);
        assert_eq!(r.incremental[0].safe_remaining, 5);
        assert_eq!(r.incremental[1].safe_remaining, 0);
    }

    #[test]
    fn single_empty_set_covers_nothing() {
        let s = StakeholderSet::new(7, vec![vec![]]).unwrap();
        assert_eq!(stakeholder_union_coverage(&s).unwrap().coverage, 0.0);
    }

    #[test]
    fn duplicates_count_once() {
        let s = StakeholderSet::new(4, vec![vec![1, 1, 2], vec![2, 3]]).unwrap();
        assert_eq!(stakeholder_union_coverage(&s).unwrap().covered, 3);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(StakeholderSet::new(4, vec![vec![4]]).is_err());
        assert!(StakeholderSet::new(0, vec![]).is_err());
    }
}
