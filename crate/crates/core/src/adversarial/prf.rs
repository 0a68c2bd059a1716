//! Keyed pseudorandom trap policies.
//!
//! The keyed function is an 8-round balanced Feistel network on a 64-bit
//! block. Round keys are `splitmix64(fnv1a(key) + r)` truncated to 32 bits
//! and the round function is a 32-bit multiply-xorshift mixer. Being a
//! Feistel network it is a permutation of the block, so distinct inputs
//! never collide. It is a toy: deterministic, well mixed, and not claimed to
//! be cryptographically secure.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{check_exhaustive, BooleanPolicy, DEFAULT_EXHAUSTIVE_LIMIT};
use crate::seed::{splitmix64, SeedStream};
use crate::stats::BinomialEstimate;

pub const FEISTEL_ROUNDS: usize = 8;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xCBF2_9CE4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

fn round_function(r: u32, k: u32) -> u32 {
    let mut z = r ^ k;
    z = (z ^ (z >> 16)).wrapping_mul(0x7FEB_352D);
    z = (z ^ (z >> 15)).wrapping_mul(0x846C_A68B);
    z ^ (z >> 16)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyedPermutation {
    round_keys: [u32; FEISTEL_ROUNDS],
}

impl KeyedPermutation {
    pub fn new(key: &[u8]) -> Self {
        let base = fnv1a(key);
        let mut round_keys = [0; FEISTEL_ROUNDS];
        for (r, k) in round_keys.iter_mut().enumerate() {
            *k = (splitmix64(base.wrapping_add(r as u64)) >> 32) as u32;
        }
        Self { round_keys }
    }

    pub fn eval(&self, x: u64) -> u64 {
        let (mut l, mut r) = ((x >> 32) as u32, x as u32);
        for &k in &self.round_keys {
            (l, r) = (r, l ^ round_function(r, k));
        }
        (u64::from(l) << 32) | u64::from(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TriggerRule {
    /// Catastrophic iff `F_k(x) < rho * 2^64`; `rho = 1/2` is the
    /// leading-bit rule.
    Density { rho: f64 },
    /// Catastrophic iff `F_k(x) = F_k(t)` for a key-derived trigger `t`, so
    /// exactly one input in `2^n` fires.
    PlantedTrigger,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrfPolicy {
    key: Vec<u8>,
    input_bits: u32,
    rule: TriggerRule,
    #[serde(skip)]
    permutation: KeyedPermutation,
    #[serde(skip)]
    threshold: u128,
    #[serde(skip)]
    trigger_value: u64,
}

impl PrfPolicy {
    pub fn key(&self) -> &[u8] {
        &self.key
    }

    pub fn input_bits(&self) -> u32 {
        self.input_bits
    }

    pub fn rule(&self) -> TriggerRule {
        self.rule
    }

    /// Nominal trigger density: `rho`, or `2^-n` for the planted trigger.
    pub fn nominal_density(&self) -> f64 {
        match self.rule {
            TriggerRule::Density { rho } => rho,
            TriggerRule::PlantedTrigger => 0.5f64.powi(self.input_bits as i32),
        }
    }

    pub fn keyed_value(&self, x: u64) -> u64 {
        self.permutation.eval(x)
    }

    /// One black-box query.
    pub fn is_catastrophic(&self, x: u64) -> bool {
        let v = self.permutation.eval(x);
        match self.rule {
            TriggerRule::Density { .. } => u128::from(v) < self.threshold,
            TriggerRule::PlantedTrigger => v == self.trigger_value,
        }
    }

    pub fn domain_size(&self) -> u64 {
        1u64 << self.input_bits
    }

    /// Exhaustive count of catastrophic inputs.
    pub fn trigger_count(&self) -> u64 {
        let n = self.domain_size();
        (0..n.div_ceil(1 << 16))
            .into_par_iter()
            .map(|c| {
                let lo = c << 16;
                (lo..(lo + (1 << 16)).min(n)).filter(|&x| self.is_catastrophic(x)).count() as u64
            })
            .sum()
    }

    pub fn to_table(&self) -> Result<BooleanPolicy> {
        BooleanPolicy::from_fn(self.input_bits, |x| self.is_catastrophic(x))
    }
}

fn check_bits(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one input bit"));
    }
    check_exhaustive(n, DEFAULT_EXHAUSTIVE_LIMIT)
}

pub fn build_prf_policy(key: &[u8], n: u32, rho: f64) -> Result<PrfPolicy> {
    check_bits(n)?;
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::invalid("rho", format!("{rho} outside (0, 1]")));
    }
    // rho * 2^64 is exact in f64 up to rounding of rho itself.
    let threshold = (rho * 18_446_744_073_709_551_616.0) as u128;
    Ok(PrfPolicy {
        key: key.to_vec(),
        input_bits: n,
        rule: TriggerRule::Density { rho },
        permutation: KeyedPermutation::new(key),
        threshold,
        trigger_value: 0,
    })
}

/// Single-trigger variant; the trigger is `splitmix64(fnv1a(key)) mod 2^n`.
pub fn build_planted_trigger_policy(key: &[u8], n: u32) -> Result<PrfPolicy> {
    check_bits(n)?;
    let permutation = KeyedPermutation::new(key);
    let trigger = splitmix64(fnv1a(key) ^ 0x5452_4947_4745_5221) & ((1u64 << n) - 1);
    Ok(PrfPolicy {
        key: key.to_vec(),
        input_bits: n,
        rule: TriggerRule::PlantedTrigger,
        trigger_value: permutation.eval(trigger),
        permutation,
        threshold: 0,
    })
}

/// `n`-byte key drawn from `rng`.
pub fn random_key(rng: &mut impl Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| rng.random()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerFraction {
    pub input_bits: u32,
    pub nominal_density: f64,
    pub count: u64,
    pub fraction: f64,
    pub sigmas: f64,
    pub within_three_sigma: bool,
}

/// Exhaustive trigger fraction compared with the nominal density.
pub fn prf_trigger_fraction(policy: &PrfPolicy) -> TriggerFraction {
    let count = policy.trigger_count();
    let n = policy.domain_size();
    let est = BinomialEstimate::new(count, n);
    let rho = policy.nominal_density();
    let sigma = est.sigma_under(rho);
    let gap = (est.estimate - rho).abs();
    let sigmas = if sigma > 0.0 { gap / sigma } else if gap == 0.0 { 0.0 } else { f64::INFINITY };
    TriggerFraction {
        input_bits: policy.input_bits(),
        nominal_density: rho,
        count,
        fraction: est.estimate,
        sigmas,
        within_three_sigma: sigmas <= 3.0,
    }
}

/// Fraction of inputs on which the two policies' trigger sets disagree.
pub fn trigger_set_disagreement(a: &PrfPolicy, b: &PrfPolicy) -> Result<f64> {
    if a.input_bits() != b.input_bits() {
        return Err(Error::DimensionMismatch {
            expected: a.input_bits() as usize,
            actual: b.input_bits() as usize,
        });
    }
    let n = a.domain_size();
    let differ = (0..n).filter(|&x| a.is_catastrophic(x) != b.is_catastrophic(x)).count();
    Ok(differ as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub query_budget: u64,
    pub detection: BinomialEstimate,
    /// `1 - (1 - rho)^q` with `rho` the exhaustively counted density.
    pub expected: f64,
    /// `1 - (1 - rho)^q` with the nominal density.
    pub expected_nominal: f64,
    pub realized_density: f64,
    pub sigmas: f64,
    pub within_three_sigma: bool,
}

const TRIALS_PER_CHUNK: u64 = 1024;

/// A black-box auditor that queries `q` uniform random inputs (with
/// replacement) and reports detection when any query is catastrophic.
pub fn blackbox_detection_experiment(
    policy: &PrfPolicy,
    query_budget: u64,
    trials: u64,
    seed: &SeedStream,
) -> Result<DetectionReport> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be positive"));
    }
    let n = policy.domain_size();
    let chunks = trials.div_ceil(TRIALS_PER_CHUNK);
    let detected: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed.rng(c);
            let count = TRIALS_PER_CHUNK.min(trials - c * TRIALS_PER_CHUNK);
            (0..count)
                .filter(|_| (0..query_budget).any(|_| policy.is_catastrophic(rng.random_range(0..n))))
                .count() as u64
        })
        .sum();
    let realized = policy.trigger_count() as f64 / n as f64;
    let detect = |rho: f64| -((query_budget as f64) * (-rho).ln_1p()).exp_m1();
    let expected = if realized == 1.0 { if query_budget == 0 { 0.0 } else { 1.0 } } else { detect(realized) };
    let nominal = policy.nominal_density();
    let expected_nominal = if nominal == 1.0 { if query_budget == 0 { 0.0 } else { 1.0 } } else { detect(nominal) };
    let detection = BinomialEstimate::new(detected, trials);
    let sigma = detection.sigma_under(expected);
    let gap = (detection.estimate - expected).abs();
    let sigmas = if sigma > 0.0 { gap / sigma } else if gap == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(DetectionReport {
        query_budget,
        detection,
        expected,
        expected_nominal,
        realized_density: realized,
        sigmas,
        within_three_sigma: sigmas <= 3.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchCostReport {
    pub input_bits: u32,
    pub keys: usize,
    /// Evaluations until the first catastrophic input, ascending scan.
    pub ascending: Vec<u64>,
    /// Same for the descending scan.
    pub descending: Vec<u64>,
    /// Mean over keys and both scan directions.
    pub mean_evaluations: f64,
    pub half_domain: f64,
    pub meets_half_domain: bool,
}

/// Counts black-box evaluations an exhaustive verifier spends before it
/// finds the planted trigger. The verifier picks its scan direction with a
/// fair coin; its expected cost per key is the mean of the two scans.
pub fn planted_trigger_search_cost(input_bits: u32, keys: &[Vec<u8>]) -> Result<SearchCostReport> {
    if keys.is_empty() {
        return Err(Error::invalid("keys", "need at least one key"));
    }
    let scans = keys
        .par_iter()
        .map(|k| {
            let p = build_planted_trigger_policy(k, input_bits)?;
            let n = p.domain_size();
            let up = (0..n).position(|x| p.is_catastrophic(x)).map(|i| i as u64 + 1);
            let down = (0..n).rev().position(|x| p.is_catastrophic(x)).map(|i| i as u64 + 1);
            match (up, down) {
                (Some(u), Some(d)) => Ok((u, d)),
                _ => Err(Error::Degenerate("planted trigger not found".into())),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (ascending, descending): (Vec<u64>, Vec<u64>) = scans.into_iter().unzip();
    let total: u64 = ascending.iter().chain(&descending).sum();
    let mean = total as f64 / (2 * keys.len()) as f64;
    let half = 2f64.powi(input_bits as i32 - 1);
    Ok(SearchCostReport {
        input_bits,
        keys: keys.len(),
        ascending,
        descending,
        mean_evaluations: mean,
        half_domain: half,
        meets_half_domain: mean >= half,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feistel_is_a_permutation_on_small_inputs() {
        let p = KeyedPermutation::new(b"k");
        let mut v: Vec<u64> = (0..4096).map(|x| p.eval(x)).collect();
        v.sort_unstable();
        v.dedup();
        assert_eq!(v.len(), 4096);
    }

    #[test]
    fn density_one_triggers_everywhere() {
        let p = build_prf_policy(b"abc", 10, 1.0).unwrap();
        assert_eq!(p.trigger_count(), 1024);
    }

    #[test]
    fn half_density_near_half() {
        let p = build_prf_policy(b"key", 16, 0.5).unwrap();
        assert!(prf_trigger_fraction(&p).within_three_sigma);
    }

    #[test]
    fn planted_trigger_is_unique() {
        let p = build_planted_trigger_policy(b"key", 12).unwrap();
        assert_eq!(p.trigger_count(), 1);
    }

    #[test]
    fn zero_queries_never_detect() {
        let p = build_prf_policy(b"key", 8, 0.5).unwrap();
        let r = blackbox_detection_experiment(&p, 0, 100, &SeedStream::new(0)).unwrap();
        assert_eq!(r.detection.successes, 0);
        assert_eq!(r.expected, 0.0);
    }

    #[test]
    fn scan_costs_pair_to_domain_plus_one() {
        let r = planted_trigger_search_cost(10, &[b"a".to_vec(), b"b".to_vec()]).unwrap();
        for (u, d) in r.ascending.iter().zip(&r.descending) {
            assert_eq!(u + d, 1025);
        }
        assert!(r.meets_half_domain);
    }

    #[test]
    fn rejects_bad_density() {
        assert!(build_prf_policy(b"k", 8, 0.0).is_err());
        assert!(build_prf_policy(b"k", 8, 1.5).is_err());
        assert!(build_prf_policy(b"k", 25, 0.5).is_err());
    }
}
