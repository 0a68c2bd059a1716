use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedStream;
use crate::stats::BinomialEstimate;

/// Samples per substream when estimating a hazard probability.
const CHUNK: usize = 4096;

/// Acts on `x` exactly when `weights . x + bias > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPolicy {
    weights: Vec<f64>,
    bias: f64,
}

impl LinearPolicy {
    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weights", "dimension must be at least 1"));
        }
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("weights", "entries must be finite"));
        }
        Ok(Self { weights, bias })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn acts(&self, x: &[f64]) -> bool {
        let s: f64 = self.weights.iter().zip(x).map(|(w, v)| w * v).sum();
        s + self.bias > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputDistribution {
    /// Independent N(0, 1) coordinates.
    StandardNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UnsafeRegion {
    /// `{x : x_1 > threshold}`.
    FirstCoordinateAbove { threshold: f64 },
    Empty,
}

impl UnsafeRegion {
    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            UnsafeRegion::FirstCoordinateAbove { threshold } => x[0] > threshold,
            UnsafeRegion::Empty => false,
        }
    }
}

/// Input measure plus the region of inputs on which acting is harmful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardModel {
    pub input_dim: usize,
    pub input_distribution: InputDistribution,
    pub unsafe_region: UnsafeRegion,
    pub description: String,
}

impl HazardModel {
    /// Unsafe threshold of the default model. With standard-normal weights
    /// and bias in ten dimensions this puts roughly 0.4% of random linear
    /// policies at hazard <= 0.01.
    pub const DEFAULT_THRESHOLD: f64 = 0.7;

    pub fn new(input_dim: usize, unsafe_region: UnsafeRegion) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input_dim", "must be at least 1"));
        }
        let description = match unsafe_region {
            UnsafeRegion::FirstCoordinateAbove { threshold } => format!(
                "x ~ N(0, I_{input_dim}); unsafe iff x_1 > {threshold}; hazard = P(policy acts and x unsafe)"
            ),
            UnsafeRegion::Empty => {
                format!("x ~ N(0, I_{input_dim}); unsafe region empty")
            }
        };
        Ok(Self {
            input_dim,
            input_distribution: InputDistribution::StandardNormal,
            unsafe_region,
            description,
        })
    }

    pub fn default_for(input_dim: usize) -> Result<Self> {
        Self::new(
            input_dim,
            UnsafeRegion::FirstCoordinateAbove {
                threshold: Self::DEFAULT_THRESHOLD,
            },
        )
    }

    fn sample_into(&self, rng: &mut impl Rng, x: &mut [f64]) {
        match self.input_distribution {
            InputDistribution::StandardNormal => {
                x.iter_mut().for_each(|v| *v = rng.sample(StandardNormal))
            }
        }
    }
}

/// Monte Carlo estimate of `P(policy acts and input is unsafe)`.
///
/// Samples are drawn in fixed chunks, each from its own substream of `seed`,
/// so the estimate does not depend on how chunks are scheduled.
pub fn hazard_probability(
    policy: &LinearPolicy,
    model: &HazardModel,
    n_samples: u64,
    seed: &SeedStream,
) -> Result<BinomialEstimate> {
    if n_samples < 100 {
        return Err(Error::invalid("n_samples", "must be at least 100"));
    }
    if policy.dim() != model.input_dim {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim,
            actual: policy.dim(),
        });
    }
    let chunks = n_samples.div_ceil(CHUNK as u64);
    let count_chunk = |c: u64| -> u64 {
        let mut rng = seed.rng(c);
        let len = (n_samples - c * CHUNK as u64).min(CHUNK as u64);
        let mut x = vec![0.0; model.input_dim];
        let mut hits = 0;
        for _ in 0..len {
            model.sample_into(&mut rng, &mut x);
            if model.unsafe_region.contains(&x) && policy.acts(&x) {
                hits += 1;
            }
        }
        hits
    };
    let hits: u64 = if chunks > 1 {
        (0..chunks).into_par_iter().map(count_chunk).sum()
    } else {
        count_chunk(0)
    };
    Ok(BinomialEstimate::new(hits, n_samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(t: f64) -> HazardModel {
        HazardModel::new(2, UnsafeRegion::FirstCoordinateAbove { threshold: t }).unwrap()
    }

    #[test]
    fn inactive_policy_has_zero_hazard() {
        let p = LinearPolicy::new(vec![0.0, 0.0], -1.0).unwrap();
        let h = hazard_probability(&p, &model(0.0), 1000, &SeedStream::new(1)).unwrap();
        assert_eq!(h.estimate, 0.0);
    }

    #[test]
    fn always_acting_policy_sees_the_unsafe_mass() {
        let p = LinearPolicy::new(vec![0.0, 0.0], 1e9).unwrap();
        let h = hazard_probability(&p, &model(0.0), 20_000, &SeedStream::new(2)).unwrap();
        assert!(h.within_sigmas(0.5, 4.0), "{h:?}");
    }

    #[test]
    fn acting_on_the_unsafe_halfspace() {
        let p = LinearPolicy::new(vec![1.0, 0.0], 0.0).unwrap();
        let h = hazard_probability(&p, &model(0.0), 20_000, &SeedStream::new(3)).unwrap();
        assert!(h.within_sigmas(0.5, 4.0), "{h:?}");
    }

    #[test]
    fn deterministic_given_seed() {
        let p = LinearPolicy::new(vec![0.3, -0.2], 0.1).unwrap();
        let a = hazard_probability(&p, &model(0.0), 10_000, &SeedStream::new(9)).unwrap();
        let b = hazard_probability(&p, &model(0.0), 10_000, &SeedStream::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validation() {
        let p = LinearPolicy::new(vec![1.0], 0.0).unwrap();
        assert!(hazard_probability(&p, &model(0.0), 1000, &SeedStream::new(0)).is_err());
        assert!(hazard_probability(&p, &HazardModel::default_for(1).unwrap(), 99, &SeedStream::new(0)).is_err());
        assert!(LinearPolicy::new(vec![], 0.0).is_err());
        assert!(LinearPolicy::new(vec![f64::NAN], 0.0).is_err());
    }
}
