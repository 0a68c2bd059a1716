//! Sample-complexity calculators and posterior experiments for learning
//! safety from data.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{alignment_error_exact, BooleanPolicy};
use crate::seed::SeedStream;
use crate::stats::BinomialEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RareEventSpec {
    pub p_d: f64,
    pub delta: f64,
}

impl RareEventSpec {
    pub fn new(p_d: f64, delta: f64) -> Result<Self> {
        if !(p_d > 0.0 && p_d < 1.0) {
            return Err(Error::invalid("p_d", format!("{p_d} outside (0, 1)")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid("delta", format!("{delta} outside (0, 1)")));
        }
        Ok(Self { p_d, delta })
    }

    /// `(1 - p_d)^m`, the chance that `m` samples contain no disaster.
    pub fn miss_probability(&self, m: u64) -> f64 {
        (m as f64 * (-self.p_d).ln_1p()).exp()
    }

    /// `1 - (1 - p_d)^m`.
    pub fn observation_probability(&self, m: u64) -> f64 {
        -(m as f64 * (-self.p_d).ln_1p()).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RareEventBound {
    pub spec: RareEventSpec,
    /// Smallest `m` with `1 - (1 - p_d)^m >= 1 - delta`.
    pub m_min: u64,
    /// The order-of-magnitude requirement `1 / p_d`.
    pub coarse_bound: f64,
    pub observation_at_m_min: f64,
}

/// `m_min = ceil(ln delta / ln(1 - p_d))`, corrected by direct evaluation so
/// that it is the least `m` meeting the confidence target.
pub fn rare_event_sample_bound(spec: &RareEventSpec) -> RareEventBound {
    let meets = |m: u64| spec.miss_probability(m) <= spec.delta;
    let mut m = (spec.delta.ln() / (-spec.p_d).ln_1p()).ceil().max(1.0) as u64;
    while !meets(m) {
        m += 1;
    }
    while m > 1 && meets(m - 1) {
        m -= 1;
    }
    RareEventBound {
        spec: *spec,
        m_min: m,
        coarse_bound: 1.0 / spec.p_d,
        observation_at_m_min: spec.observation_probability(m),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RareObservationReport {
    pub p_d: f64,
    pub m: u64,
    pub empirical: BinomialEstimate,
    pub expected: f64,
    /// Distance from the expectation in binomial sigmas (0 when exact).
    pub sigmas: f64,
    pub within_three_sigma: bool,
}

const TRIALS_PER_CHUNK: u64 = 4096;

/// Monte Carlo frequency of seeing at least one disaster in `m` samples.
///
/// Each trial draws the index of its first disaster from a geometric
/// distribution, which has the same law as scanning `m` Bernoulli draws.
pub fn simulate_rare_observation(
    p_d: f64,
    m: u64,
    trials: u64,
    seed: &SeedStream,
) -> Result<RareObservationReport> {
    if !(p_d > 0.0 && p_d <= 1.0) {
        return Err(Error::invalid("p_d", format!("{p_d} outside (0, 1]")));
    }
    if trials < 1000 {
        return Err(Error::invalid("trials", "need at least 1000 trials"));
    }
    let geometric = Geometric::new(p_d).map_err(|e| Error::invalid("p_d", e.to_string()))?;
    let chunks = trials.div_ceil(TRIALS_PER_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed.rng(c);
            let n = TRIALS_PER_CHUNK.min(trials - c * TRIALS_PER_CHUNK);
            (0..n).filter(|_| geometric.sample(&mut rng) < m).count() as u64
        })
        .sum();
    let empirical = BinomialEstimate::new(hits, trials);
    let expected = if p_d == 1.0 {
        if m == 0 { 0.0 } else { 1.0 }
    } else {
        -(m as f64 * (-p_d).ln_1p()).exp_m1()
    };
    let sigma = empirical.sigma_under(expected);
    let gap = (empirical.estimate - expected).abs();
    let sigmas = if sigma > 0.0 { gap / sigma } else if gap == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(RareObservationReport {
        p_d,
        m,
        empirical,
        expected,
        sigmas,
        within_three_sigma: sigmas <= 3.0,
    })
}

/// `eps_min * (1 - Q(S))`: the expected risk of any posterior placing mass
/// `Q(S)` on the safe set when every unsafe hypothesis has risk at least
/// `eps_min`.
pub fn pac_bayes_lower_bound(eps_min: f64, q_safe_mass: f64) -> Result<f64> {
    if !(eps_min.is_finite() && eps_min >= 0.0) {
        return Err(Error::invalid("eps_min", "must be finite and non-negative"));
    }
    if !(0.0..=1.0).contains(&q_safe_mass) {
        return Err(Error::invalid("q_safe_mass", "must be a probability"));
    }
    Ok(eps_min * (1.0 - q_safe_mass))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KlDivergence {
    Finite { value: f64 },
    /// Some `Q_i > 0` sits on a hypothesis with `P_i = 0`.
    Infinite,
}

impl KlDivergence {
    pub fn is_finite(&self) -> bool {
        matches!(self, KlDivergence::Finite { .. })
    }
}

/// `KL(Q || P)` in nats, with the convention `0 ln 0 = 0`.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> Result<KlDivergence> {
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            actual: q.len(),
        });
    }
    if q.iter().chain(p).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("distribution", "entries must be finite and non-negative"));
    }
    let mut kl = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        if qi > 0.0 {
            if pi == 0.0 {
                return Ok(KlDivergence::Infinite);
            }
            kl += qi * (qi / pi).ln();
        }
    }
    Ok(KlDivergence::Finite { value: kl.max(0.0) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    Uniform,
    /// Uniform over unsafe hypotheses; the safe set gets no mass.
    ZeroOnSafe,
    /// Safe set receives `milli / 1000` in total, split evenly.
    SafeMass { milli: u32 },
    /// Unnormalised integer weights, one per hypothesis.
    Weights { weights: Vec<u64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureSource {
    Fixed { failures: u64 },
    /// Failures drawn as `Binomial(observations, L(truth))`.
    DrawnFrom { truth: usize },
}

/// Observations are i.i.d. trials in which hypothesis `h` fails with
/// probability `L(h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub observations: u64,
    pub failures: FailureSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorConfig {
    /// Risk of each hypothesis in thousandths; safe hypotheses must be 0.
    pub losses_milli: Vec<u32>,
    pub safe: Vec<usize>,
    pub prior: PriorSpec,
    pub data: DataSpec,
}

impl PosteriorConfig {
    /// A random instance: 2..=12 hypotheses, a non-empty safe set, losses of
    /// unsafe hypotheses in `[eps_min, 0.999]`, a random prior family that
    /// gives every unsafe hypothesis positive mass, and data drawn from a
    /// random hypothesis. Such data never has zero evidence.
    pub fn random(rng: &mut impl Rng) -> Self {
        let n = rng.random_range(2..=12usize);
        let safe_count = rng.random_range(1..n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            idx.swap(i, rng.random_range(0..=i));
        }
        let mut safe: Vec<usize> = idx[..safe_count].to_vec();
        safe.sort_unstable();
        let eps_min = rng.random_range(1..=500u32);
        let losses_milli = (0..n)
            .map(|h| if safe.contains(&h) { 0 } else { rng.random_range(eps_min..=999) })
            .collect();
        let prior = match rng.random_range(0..4) {
            0 => PriorSpec::Uniform,
            1 => PriorSpec::ZeroOnSafe,
            2 => PriorSpec::SafeMass {
                milli: rng.random_range(0..1000),
            },
            _ => PriorSpec::Weights {
                weights: (0..n).map(|_| rng.random_range(1..=20)).collect(),
            },
        };
        let data = DataSpec {
            observations: rng.random_range(0..=60),
            failures: FailureSource::DrawnFrom {
                truth: rng.random_range(0..n),
            },
        };
        Self {
            losses_milli,
            safe,
            prior,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    pub hypotheses: usize,
    pub prior: Vec<f64>,
    pub posterior: Vec<f64>,
    pub p_safe: f64,
    pub q_safe: f64,
    pub kl_divergence: KlDivergence,
    pub expected_risk: f64,
    /// Smallest risk among unsafe hypotheses (0 if all are safe).
    pub eps_min: f64,
    pub lower_bound: f64,
    /// `E_Q[L] >= eps_min (1 - Q(S))`, decided in exact rational arithmetic.
    pub bound_holds_exactly: bool,
    /// With `P(S) = 0`: whether `Q(S) = 0` exactly. Absent otherwise.
    pub zero_prior_forces_zero_posterior: Option<bool>,
    pub observations: u64,
    pub failures: u64,
    pub expected_risk_exact: String,
    pub lower_bound_exact: String,
}

fn ratio(n: u64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn prior_weights(config: &PosteriorConfig) -> Result<Vec<BigRational>> {
    let n = config.losses_milli.len();
    let is_safe = |h: usize| config.safe.contains(&h);
    let safe_n = config.safe.len() as u64;
    let unsafe_n = n as u64 - safe_n;
    let w: Vec<BigRational> = match &config.prior {
        PriorSpec::Uniform => (0..n).map(|_| ratio(1, n as u64)).collect(),
        PriorSpec::ZeroOnSafe => {
            if unsafe_n == 0 {
                return Err(Error::invalid("prior", "no unsafe hypothesis to carry the mass"));
            }
            (0..n)
                .map(|h| if is_safe(h) { BigRational::zero() } else { ratio(1, unsafe_n) })
                .collect()
        }
        PriorSpec::SafeMass { milli } => {
            if *milli > 1000 {
                return Err(Error::invalid("prior", "safe mass above 1000 milli"));
            }
            let s = u64::from(*milli);
            if (safe_n == 0 && s > 0) || (unsafe_n == 0 && s < 1000) {
                return Err(Error::invalid("prior", "safe mass cannot be placed"));
            }
            (0..n)
                .map(|h| {
                    if is_safe(h) {
                        ratio(s, 1000 * safe_n)
                    } else {
                        ratio(1000 - s, 1000 * unsafe_n)
                    }
                })
                .collect()
        }
        PriorSpec::Weights { weights } => {
            if weights.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: weights.len(),
                });
            }
            let total: u64 = weights.iter().sum();
            if total == 0 {
                return Err(Error::invalid("prior", "weights sum to zero"));
            }
            weights.iter().map(|&w| ratio(w, total)).collect()
        }
    };
    Ok(w)
}

/// Exact Bayesian update over a finite hypothesis class, followed by the
/// PAC-Bayes risk check.
pub fn toy_posterior_experiment(config: &PosteriorConfig, seed: &SeedStream) -> Result<PosteriorReport> {
    let n = config.losses_milli.len();
    if n == 0 {
        return Err(Error::invalid("losses_milli", "empty hypothesis class"));
    }
    if let Some(&h) = config.safe.iter().find(|&&h| h >= n) {
        return Err(Error::invalid("safe", format!("index {h} outside class of size {n}")));
    }
    if let Some(l) = config.losses_milli.iter().find(|&&l| l > 1000) {
        return Err(Error::invalid("losses_milli", format!("{l} exceeds 1000")));
    }
    if config.safe.iter().any(|&h| config.losses_milli[h] != 0) {
        return Err(Error::invalid("losses_milli", "safe hypotheses must have zero loss"));
    }
    let is_safe = |h: usize| config.safe.contains(&h);
    if (0..n).any(|h| !is_safe(h) && config.losses_milli[h] == 0) {
        return Err(Error::invalid("losses_milli", "unsafe hypotheses need positive loss"));
    }
    let prior = prior_weights(config)?;
    let obs = config.data.observations;
    let failures = match config.data.failures {
        FailureSource::Fixed { failures } => failures,
        FailureSource::DrawnFrom { truth } => {
            let l = *config
                .losses_milli
                .get(truth)
                .ok_or_else(|| Error::invalid("truth", "hypothesis index out of range"))?;
            let b = Binomial::new(obs, f64::from(l) / 1000.0)
                .map_err(|e| Error::invalid("data", e.to_string()))?;
            b.sample(&mut seed.rng(0))
        }
    };
    if failures > obs {
        return Err(Error::invalid("failures", "more failures than observations"));
    }
    let losses: Vec<BigRational> = config.losses_milli.iter().map(|&l| ratio(u64::from(l), 1000)).collect();
    let exp = |e: u64| i32::try_from(e).map_err(|_| Error::invalid("observations", "too many"));
    let (k, rest) = (exp(failures)?, exp(obs - failures)?);
    let joint: Vec<BigRational> = prior
        .iter()
        .zip(&losses)
        .map(|(p, l)| p * num_traits::pow::Pow::pow(l, k) * num_traits::pow::Pow::pow(&(BigRational::one() - l), rest))
        .collect();
    let evidence: BigRational = joint.iter().sum();
    if evidence.is_zero() {
        return Err(Error::Degenerate("data has zero likelihood under the prior".into()));
    }
    let posterior: Vec<BigRational> = joint.iter().map(|j| j / &evidence).collect();
    let q_safe: BigRational = config.safe.iter().map(|&h| posterior[h].clone()).sum();
    let p_safe: BigRational = config.safe.iter().map(|&h| prior[h].clone()).sum();
    let risk: BigRational = posterior.iter().zip(&losses).map(|(q, l)| q * l).sum();
    let eps_min = (0..n)
        .filter(|&h| !is_safe(h))
        .map(|h| losses[h].clone())
        .min()
        .unwrap_or_else(BigRational::zero);
    let bound = &eps_min * (BigRational::one() - &q_safe);
    let prior_f: Vec<f64> = prior.iter().map(to_f64).collect();
    let posterior_f: Vec<f64> = posterior.iter().map(to_f64).collect();
    Ok(PosteriorReport {
        hypotheses: n,
        kl_divergence: kl_divergence(&posterior_f, &prior_f)?,
        prior: prior_f,
        posterior: posterior_f,
        p_safe: to_f64(&p_safe),
        q_safe: to_f64(&q_safe),
        expected_risk: to_f64(&risk),
        eps_min: to_f64(&eps_min),
        lower_bound: to_f64(&bound),
        bound_holds_exactly: risk >= bound,
        zero_prior_forces_zero_posterior: p_safe.is_zero().then(|| q_safe.is_zero()),
        observations: obs,
        failures,
        expected_risk_exact: risk.to_string(),
        lower_bound_exact: bound.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySampler {
    /// Every table bit an independent fair coin.
    UniformTable { arity: u32 },
    /// Every table bit catastrophic with probability `p`.
    Biased { arity: u32, p: f64 },
}

impl PolicySampler {
    pub fn arity(&self) -> u32 {
        match *self {
            PolicySampler::UniformTable { arity } | PolicySampler::Biased { arity, .. } => arity,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<BooleanPolicy> {
        let arity = self.arity();
        let words = match *self {
            PolicySampler::UniformTable { .. } => {
                let blank = BooleanPolicy::zeros(arity)?;
                blank.words().iter().map(|_| rng.random()).collect()
            }
            PolicySampler::Biased { p, .. } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid("p", "must be a probability"));
                }
                let mut t = BooleanPolicy::zeros(arity)?;
                for x in 0..t.domain_size() {
                    if rng.random_bool(p) {
                        t.set(x, true)?;
                    }
                }
                return Ok(t);
            }
        };
        BooleanPolicy::from_words(arity, words)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsMeasureRow {
    pub eps: f64,
    pub estimate: BinomialEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsMonotonicityReport {
    pub sampler: PolicySampler,
    pub n_samples: u64,
    pub rows: Vec<EpsMeasureRow>,
    pub non_decreasing: bool,
}

/// Fraction of sampled policies with alignment error at most each `eps`.
/// Every threshold is applied to the same samples, so the sets are nested.
pub fn eps_safe_set_monotonicity(
    sampler: &PolicySampler,
    eps_grid: &[f64],
    n_samples: u64,
    seed: &SeedStream,
) -> Result<EpsMonotonicityReport> {
    if eps_grid.is_empty() {
        return Err(Error::invalid("eps_grid", "empty"));
    }
    if eps_grid.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(Error::invalid("eps_grid", "entries must lie in [0, 1]"));
    }
    if eps_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("eps_grid", "must be strictly ascending"));
    }
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be positive"));
    }
    let errors = (0..n_samples)
        .into_par_iter()
        .map(|i| alignment_error_exact(&sampler.sample(&mut seed.rng(i))?))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<EpsMeasureRow> = eps_grid
        .iter()
        .map(|&eps| EpsMeasureRow {
            eps,
            estimate: BinomialEstimate::new(errors.iter().filter(|e| e.at_most(eps)).count() as u64, n_samples),
        })
        .collect();
    let non_decreasing = rows
        .windows(2)
        .all(|w| w[0].estimate.successes <= w[1].estimate.successes);
    Ok(EpsMonotonicityReport {
        sampler: *sampler,
        n_samples,
        rows,
        non_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coin_flip_needs_one_sample() {
        let b = rare_event_sample_bound(&RareEventSpec::new(0.5, 0.5).unwrap());
        assert_eq!(b.m_min, 1);
    }

    #[test]
    fn ten_percent_at_one_percent_confidence() {
        let b = rare_event_sample_bound(&RareEventSpec::new(0.1, 0.01).unwrap());
        assert_eq!(b.m_min, 44);
    }

    #[test]
    fn one_in_a_million() {
        let b = rare_event_sample_bound(&RareEventSpec::new(1e-6, (-1f64).exp()).unwrap());
        assert!((b.m_min as f64 - 1e6).abs() < 10.0, "{}", b.m_min);
        assert_eq!(b.coarse_bound, 1e6);
    }

    #[test]
    fn observation_edge_cases() {
        let s = SeedStream::new(1);
        assert_eq!(simulate_rare_observation(0.3, 0, 1000, &s).unwrap().empirical.successes, 0);
        assert_eq!(simulate_rare_observation(1.0, 5, 1000, &s).unwrap().empirical.successes, 1000);
        assert!(simulate_rare_observation(0.3, 5, 999, &s).is_err());
    }

    #[test]
    fn pac_bayes_arithmetic() {
        assert_eq!(pac_bayes_lower_bound(0.3, 0.0).unwrap(), 0.3);
        assert_eq!(pac_bayes_lower_bound(0.3, 1.0).unwrap(), 0.0);
        assert!((pac_bayes_lower_bound(0.05, 0.2).unwrap() - 0.04).abs() < 1e-15);
    }

    #[test]
    fn kl_infinite_only_off_support() {
        assert_eq!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), KlDivergence::Infinite);
        assert!(kl_divergence(&[1.0, 0.0], &[0.5, 0.0]).unwrap().is_finite());
        assert_eq!(
            kl_divergence(&[0.25, 0.75], &[0.25, 0.75]).unwrap(),
            KlDivergence::Finite { value: 0.0 }
        );
    }

    #[test]
    fn zero_prior_on_safe_set() {
        let c = PosteriorConfig {
            losses_milli: vec![0, 100, 300, 900],
            safe: vec![0],
            prior: PriorSpec::ZeroOnSafe,
            data: DataSpec {
                observations: 50,
                failures: FailureSource::Fixed { failures: 0 },
            },
        };
        let r = toy_posterior_experiment(&c, &SeedStream::new(0)).unwrap();
        assert_eq!(r.q_safe, 0.0);
        assert_eq!(r.zero_prior_forces_zero_posterior, Some(true));
        assert!(r.expected_risk >= 0.1);
        assert!(r.bound_holds_exactly);
    }

    #[test]
    fn strong_data_concentrates_on_safe() {
        let mut losses = vec![0];
        losses.extend((1..10).map(|i| 100 * i));
        let c = PosteriorConfig {
            losses_milli: losses,
            safe: vec![0],
            prior: PriorSpec::SafeMass { milli: 100 },
            data: DataSpec {
                observations: 400,
                failures: FailureSource::Fixed { failures: 0 },
            },
        };
        let r = toy_posterior_experiment(&c, &SeedStream::new(0)).unwrap();
        assert!(r.q_safe > 1.0 - 1e-9);
        assert!(r.lower_bound < 1e-9);
        assert!(r.bound_holds_exactly);
    }

    #[test]
    fn all_safe_class_has_zero_risk() {
        let c = PosteriorConfig {
            losses_milli: vec![0, 0, 0],
            safe: vec![0, 1, 2],
            prior: PriorSpec::Uniform,
            data: DataSpec {
                observations: 10,
                failures: FailureSource::Fixed { failures: 0 },
            },
        };
        let r = toy_posterior_experiment(&c, &SeedStream::new(0)).unwrap();
        assert_eq!(r.expected_risk, 0.0);
        assert_eq!(r.q_safe, 1.0);
    }

    #[test]
    fn eps_one_captures_everything() {
        let r = eps_safe_set_monotonicity(
            &PolicySampler::UniformTable { arity: 6 },
            &[0.0, 0.5, 1.0],
            200,
            &SeedStream::new(3),
        )
        .unwrap();
        assert_eq!(r.rows[2].estimate.successes, 200);
        assert_eq!(r.rows[0].estimate.successes, 0);
        assert!(r.non_decreasing);
    }

    #[test]
    fn grid_must_ascend() {
        let s = PolicySampler::UniformTable { arity: 4 };
        assert!(eps_safe_set_monotonicity(&s, &[0.5, 0.5], 10, &SeedStream::new(0)).is_err());
    }
}
