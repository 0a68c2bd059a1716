//! Counting and sampling demonstrations of how rare safe policies are.

use num_bigint::BigUint;
use num_traits::One;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{hazard_probability, HazardModel, LinearPolicy};
use crate::seed::SeedStream;
use crate::stats::histogram;

/// `log2` upper bound on the number of atoms in the observable universe (~10^80).
pub const LOG2_ATOMS_BOUND: u64 = 266;
/// `log2` upper bound on the number of Planck times since the Big Bang (~10^61).
pub const LOG2_PLANCK_TIMES_BOUND: u64 = 204;

/// Largest `2^m` for which the exact fraction is materialised.
const EXACT_DENOMINATOR_BITS: u64 = 1024;

/// A possibly astronomically small fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFraction {
    pub log10_value: f64,
    /// Decimal numerator and denominator, present when the denominator has at
    /// most 1024 bits.
    pub exact: Option<(String, String)>,
}

impl LogFraction {
    /// The fraction as a float; underflows to 0 below ~1e-308.
    pub fn value(&self) -> f64 {
        10f64.powf(self.log10_value)
    }

    pub fn exact_parts(&self) -> Option<(BigUint, BigUint)> {
        let (n, d) = self.exact.as_ref()?;
        Some((n.parse().ok()?, d.parse().ok()?))
    }
}

/// Fraction of Boolean functions on `m` inputs that are the single all-safe
/// function: `2^(-2^m)`.
pub fn safe_policy_fraction(m: u32) -> Result<LogFraction> {
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    if m > 1000 {
        return Err(Error::invalid("m", "2^m overflows the log10 representation"));
    }
    let functions_log2 = 2f64.powi(m as i32);
    let exact = (m < 64 && (1u64 << m) <= EXACT_DENOMINATOR_BITS).then(|| {
        let denominator = BigUint::one() << (1usize << m);
        ("1".to_string(), denominator.to_string())
    });
    Ok(LogFraction {
        log10_value: -functions_log2 * std::f64::consts::LOG10_2,
        exact,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceFillingCost {
    pub dimension: u64,
    pub resolution_bits_per_dim: u64,
    /// `log2` of the number of grid samples needed to cover the space.
    pub log2_samples: u64,
    pub log2_atoms_bound: u64,
    pub log2_planck_times_bound: u64,
    pub exceeds_atoms: bool,
    pub exceeds_planck_times: bool,
}

/// Samples needed to fill a `dimension`-dimensional grid at the given
/// resolution, compared with physical reference counts.
pub fn space_filling_cost(dimension: u64, resolution_bits_per_dim: u64) -> Result<SpaceFillingCost> {
    if dimension == 0 || resolution_bits_per_dim == 0 {
        return Err(Error::invalid("dimension", "dimension and resolution must be positive"));
    }
    let log2_samples = dimension
        .checked_mul(resolution_bits_per_dim)
        .ok_or_else(|| Error::invalid("dimension", "sample count exponent overflows u64"))?;
    Ok(SpaceFillingCost {
        dimension,
        resolution_bits_per_dim,
        log2_samples,
        log2_atoms_bound: LOG2_ATOMS_BOUND,
        log2_planck_times_bound: LOG2_PLANCK_TIMES_BOUND,
        exceeds_atoms: log2_samples > LOG2_ATOMS_BOUND,
        exceeds_planck_times: log2_samples > LOG2_PLANCK_TIMES_BOUND,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_policies: u64,
    pub eps: f64,
    pub safe_fraction_at_eps: f64,
    /// False below 1000 policies.
    pub reportable: bool,
    pub samples_per_policy: u64,
    pub model_description: String,
    /// Per-policy hazard estimates, in sampling order.
    #[serde(skip)]
    pub hazards: Vec<f64>,
}

impl HazardHistogram {
    pub const BINS: usize = 50;

    /// Fraction of the sampled policies with hazard at most `eps`.
    pub fn safe_fraction_at(&self, eps: f64) -> f64 {
        self.hazards.iter().filter(|&&h| h <= eps).count() as f64 / self.hazards.len() as f64
    }
}

/// Hazard distribution of random linear policies with standard-normal
/// weights and bias.
pub fn sample_linear_policy_hazards(
    n_policies: u64,
    model: &HazardModel,
    samples_per_policy: u64,
    eps: f64,
    seed: &SeedStream,
) -> Result<HazardHistogram> {
    if n_policies == 0 {
        return Err(Error::invalid("n_policies", "must be positive"));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid("eps", format!("{eps} outside [0, 1]")));
    }
    let dim = model.input_dim;
    let policies = seed.child("policies");
    let hazard_streams = seed.child("hazards");
    let hazards = (0..n_policies)
        .into_par_iter()
        .map(|i| {
            let mut rng = policies.rng(i);
            let weights: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let policy = LinearPolicy::new(weights, rng.sample(StandardNormal))?;
            Ok(hazard_probability(&policy, model, samples_per_policy, &hazard_streams.index(i))?.estimate)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (bin_edges, counts) = histogram(&hazards, 0.0, 1.0, HazardHistogram::BINS);
    let safe = hazards.iter().filter(|&&h| h <= eps).count();
    Ok(HazardHistogram {
        bin_edges,
        counts,
        n_policies,
        eps,
        safe_fraction_at_eps: safe as f64 / n_policies as f64,
        reportable: n_policies >= 1000,
        samples_per_policy,
        model_description: model.description.clone(),
        hazards,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncompressibilityVerdict {
    pub rule_bits: u64,
    pub capacity_bits: u64,
    /// Fewer than `2^(C+1)` programs have at most `C` bits.
    pub log2_program_count_bound: u64,
    /// `log2` of the bound `2^(C-K+1)` on the fraction of `K`-bit rule
    /// tables any `C`-bit-capacity decoder can produce.
    pub log2_fraction_bound: i64,
    pub feasible: bool,
}

impl IncompressibilityVerdict {
    /// The fraction bound, capped at 1.
    pub fn fraction_bound(&self) -> f64 {
        2f64.powi(self.log2_fraction_bound.min(0).max(i64::from(i32::MIN)) as i32)
    }
}

/// Counting bound on storing `rule_bits` of incompressible rules in
/// `capacity_bits` of program.
pub fn incompressibility_verdict(rule_bits: u64, capacity_bits: u64) -> IncompressibilityVerdict {
    IncompressibilityVerdict {
        rule_bits,
        capacity_bits,
        log2_program_count_bound: capacity_bits + 1,
        log2_fraction_bound: capacity_bits as i64 - rule_bits as i64 + 1,
        feasible: capacity_bits >= rule_bits,
    }
}
