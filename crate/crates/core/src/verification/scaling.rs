//! Verification-cost benchmark.
//!
//! For each arity `m` the benchmark builds tautologies `phi = !psi` where `psi`
//! is an unsatisfiable uniform random 3-CNF: `round(4.26 m)` clauses, extended
//! one random clause at a time until unsatisfiable. Their reduction policies
//! are perfectly safe, so the verifier must inspect the whole table. Each
//! instance is timed on a monotonic clock with one warmup round and the median
//! of at least five timed samples, each sample running enough repetitions to
//! exceed 100 clock ticks. Timed sections run one at a time on the calling
//! thread.

use std::hint::black_box;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::formula::{random_clause, Formula, PropositionalFormula};
use super::{policy_from_formula, verify_perfect_safety};
use crate::error::{Error, Result};
use crate::policy::{check_exhaustive, DEFAULT_EXHAUSTIVE_LIMIT};
use crate::seed::SeedStream;
use crate::stats::{least_squares_slope, median};

/// Clause-to-variable ratio of the random 3-CNF instances.
pub const CLAUSE_RATIO: f64 = 4.26;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingOptions {
    /// Timed samples per instance (at least 5).
    pub samples_per_instance: usize,
    pub warmup_rounds: usize,
    /// Lower bound on the duration of one timed sample.
    pub min_sample_ns: u64,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            samples_per_instance: 5,
            warmup_rounds: 1,
            min_sample_ns: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub m: u32,
    /// Timed samples contributing to the row (instances x samples).
    pub trials: usize,
    /// Median verification time of one call, nanoseconds.
    pub median_ns: f64,
    pub repetitions: u64,
    pub clauses: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of log2(median_ns) against m; absent for one row.
    pub slope: Option<f64>,
    pub time_unit: String,
    pub clock_granularity_ns: f64,
    pub instance_model: String,
}

/// Builds `!psi` for an unsatisfiable random 3-CNF `psi` over `m` variables.
/// Returns the tautology and the clause count of `psi`.
pub fn negated_unsat_instance(m: u32, rng: &mut impl Rng) -> Result<(PropositionalFormula, usize)> {
    check_exhaustive(m, DEFAULT_EXHAUSTIVE_LIMIT)?;
    let blocks = if m < 6 { 1 } else { 1u64 << (m - 6) };
    let tail = if m < 6 { (1u64 << (1u32 << m)) - 1 } else { !0 };
    let mut satisfying = vec![!0u64; blocks as usize];
    satisfying[0] &= tail;
    let mut clauses = Vec::new();
    let initial = (CLAUSE_RATIO * f64::from(m)).round().max(1.0) as usize;
    while clauses.len() < initial || satisfying.iter().any(|&w| w != 0) {
        let clause = Formula::Or(random_clause(m, 3.min(m), rng));
        for (b, w) in satisfying.iter_mut().enumerate() {
            if *w != 0 {
                *w &= clause.eval_block(b as u64);
            }
        }
        clauses.push(clause);
    }
    let count = clauses.len();
    let psi = PropositionalFormula::new(Formula::And(clauses), m)?;
    Ok((psi.negated(), count))
}

fn clock_granularity_ns() -> f64 {
    let mut best = u128::MAX;
    for _ in 0..200 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min((b - a).as_nanos());
    }
    best.max(1) as f64
}

pub fn measure_verification_scaling(
    m_values: &[u32],
    formulas_per_m: usize,
    seed: &SeedStream,
    options: &ScalingOptions,
) -> Result<ScalingReport> {
    if m_values.is_empty() {
        return Err(Error::invalid("m_values", "at least one arity required"));
    }
    if formulas_per_m < 3 {
        return Err(Error::invalid("formulas_per_m", "must be at least 3"));
    }
    if options.samples_per_instance < 5 {
        return Err(Error::invalid("samples_per_instance", "must be at least 5"));
    }
    let mut ms = m_values.to_vec();
    ms.sort_unstable();
    if ms.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("m_values", "duplicate arity"));
    }
    for &m in &ms {
        check_exhaustive(m, DEFAULT_EXHAUSTIVE_LIMIT)?;
    }

    let granularity = clock_granularity_ns();
    let floor_ns = (100.0 * granularity).max(options.min_sample_ns as f64);
    let stream = seed.child("verification-scaling");
    let mut rows = Vec::with_capacity(ms.len());
    for &m in &ms {
        let mut instance_medians = Vec::with_capacity(formulas_per_m);
        let mut clauses = Vec::with_capacity(formulas_per_m);
        let mut max_reps = 0;
        let mut warnings = Vec::new();
        for f in 0..formulas_per_m {
            let mut rng = stream.index(u64::from(m)).rng(f as u64);
            let (phi, count) = negated_unsat_instance(m, &mut rng)?;
            clauses.push(count);
            let policy = policy_from_formula(&phi)?.policy;
            if !verify_perfect_safety(&policy)?.is_safe() {
                return Err(Error::Precondition(format!(
                    "instance {f} at m={m} is not a tautology"
                )));
            }
            let run = |reps: u64| -> f64 {
                let start = Instant::now();
                for _ in 0..reps {
                    let _ = black_box(verify_perfect_safety(black_box(&policy)));
                }
                start.elapsed().as_nanos() as f64
            };
            let mut reps = 1u64;
            while run(reps) < floor_ns {
                if reps >= 1 << 40 {
                    warnings.push(format!(
                        "instance {f}: sample stayed below {floor_ns} ns at {reps} repetitions"
                    ));
                    break;
                }
                reps *= 2;
            }
            max_reps = max_reps.max(reps);
            for _ in 0..options.warmup_rounds {
                run(reps);
            }
            let samples: Vec<f64> = (0..options.samples_per_instance)
                .map(|_| run(reps) / reps as f64)
                .collect();
            instance_medians.push(median(&samples).expect("non-empty"));
        }
        rows.push(ScalingRow {
            m,
            trials: formulas_per_m * options.samples_per_instance,
            median_ns: median(&instance_medians).expect("non-empty"),
            repetitions: max_reps,
            clauses,
            warnings,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| f64::from(r.m)).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.median_ns.log2()).collect();
    Ok(ScalingReport {
        slope: least_squares_slope(&xs, &ys),
        rows,
        time_unit: "ns".into(),
        clock_granularity_ns: granularity,
        instance_model: format!(
            "tautology !psi, psi uniform random 3-CNF with round({CLAUSE_RATIO} m) clauses extended until unsatisfiable"
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_tautologies() {
        let mut rng = SeedStream::new(3).rng(0);
        for m in 1..=9 {
            let (phi, clauses) = negated_unsat_instance(m, &mut rng).unwrap();
            assert!(clauses >= (CLAUSE_RATIO * f64::from(m)).round() as usize);
            assert!((0..1u64 << m).all(|a| phi.eval(a)), "m={m}");
        }
    }

    #[test]
    fn single_row_has_no_slope() {
        let opts = ScalingOptions {
            min_sample_ns: 10_000,
            ..ScalingOptions::default()
        };
        let r = measure_verification_scaling(&[6], 3, &SeedStream::new(1), &opts).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.slope, None);
        assert_eq!(r.rows[0].trials, 15);
    }

    #[test]
    fn rejects_bad_arguments() {
        let opts = ScalingOptions::default();
        let s = SeedStream::new(1);
        assert!(measure_verification_scaling(&[4, 4], 3, &s, &opts).is_err());
        assert!(measure_verification_scaling(&[4], 2, &s, &opts).is_err());
        assert!(measure_verification_scaling(&[25], 3, &s, &opts).is_err());
        assert!(measure_verification_scaling(&[], 3, &s, &opts).is_err());
    }
}
