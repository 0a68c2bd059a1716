//! Policy representations and alignment error.
//!
//! A [`BooleanPolicy`] is the full truth table of a map `{0,1}^m -> {safe,
//! catastrophic}`. Bit `i` is the output on the input whose binary encoding
//! is `i`; a set bit means catastrophic, so alignment error is a popcount.

mod linear;
mod relu;

pub use linear::{hazard_probability, HazardModel, InputDistribution, LinearPolicy, UnsafeRegion};
pub use relu::{evaluate_relu, DenseLayer, ReluNetwork};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest arity exact (enumerating) operations accept by default.
pub const DEFAULT_EXHAUSTIVE_LIMIT: u32 = 24;

/// Largest arity a truth table may be allocated with (128 MiB).
pub const MAX_TABLE_ARITY: u32 = 30;

/// Truth table of a Boolean policy over `arity`-bit inputs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BooleanPolicy {
    arity: u32,
    words: Vec<u64>,
}

impl BooleanPolicy {
    pub fn zeros(arity: u32) -> Result<Self> {
        check_storable(arity)?;
        Ok(Self {
            arity,
            words: vec![0; word_count(arity)],
        })
    }

    pub fn ones(arity: u32) -> Result<Self> {
        let mut p = Self::zeros(arity)?;
        p.words.iter_mut().for_each(|w| *w = !0);
        p.mask_tail();
        Ok(p)
    }

    /// Builds the table by evaluating `catastrophic` on every input.
    pub fn from_fn(arity: u32, mut catastrophic: impl FnMut(u64) -> bool) -> Result<Self> {
        let mut p = Self::zeros(arity)?;
        for x in 0..p.domain_size() {
            if catastrophic(x) {
                p.words[(x / 64) as usize] |= 1 << (x % 64);
            }
        }
        Ok(p)
    }

    /// Wraps raw table words; bits beyond the domain are cleared.
    pub fn from_words(arity: u32, words: Vec<u64>) -> Result<Self> {
        check_storable(arity)?;
        if words.len() != word_count(arity) {
            return Err(Error::DimensionMismatch {
                expected: word_count(arity),
                actual: words.len(),
            });
        }
        let mut p = Self { arity, words };
        p.mask_tail();
        Ok(p)
    }

    /// Table with exactly the listed inputs catastrophic.
    pub fn with_catastrophic(arity: u32, inputs: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut p = Self::zeros(arity)?;
        for x in inputs {
            p.set(x, true)?;
        }
        Ok(p)
    }

    pub fn arity(&self) -> u32 {
        self.arity
    }

    pub fn domain_size(&self) -> u64 {
        1u64 << self.arity
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn is_catastrophic(&self, x: u64) -> bool {
        assert!(x < self.domain_size(), "input {x} outside the domain");
        self.words[(x / 64) as usize] >> (x % 64) & 1 == 1
    }

    pub fn set(&mut self, x: u64, catastrophic: bool) -> Result<()> {
        if x >= self.domain_size() {
            return Err(Error::invalid(
                "input",
                format!("{x} outside the {}-bit domain", self.arity),
            ));
        }
        let bit = 1u64 << (x % 64);
        let w = &mut self.words[(x / 64) as usize];
        if catastrophic {
            *w |= bit;
        } else {
            *w &= !bit;
        }
        Ok(())
    }

    pub fn count_catastrophic(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    /// Lowest catastrophic input, scanning the table a word at a time.
    pub fn first_catastrophic(&self) -> Option<u64> {
        self.words
            .iter()
            .position(|&w| w != 0)
            .map(|i| i as u64 * 64 + u64::from(self.words[i].trailing_zeros()))
    }

    pub fn catastrophic_inputs(&self) -> impl Iterator<Item = u64> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros();
                w &= w - 1;
                Some(i as u64 * 64 + u64::from(bit))
            })
        })
    }

    /// Number of inputs where the two tables disagree.
    pub fn hamming_distance(&self, other: &Self) -> Result<u64> {
        if self.arity != other.arity {
            return Err(Error::DimensionMismatch {
                expected: self.arity as usize,
                actual: other.arity as usize,
            });
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a ^ b).count_ones()))
            .sum())
    }

    fn mask_tail(&mut self) {
        if self.arity < 6 {
            self.words[0] &= (1u64 << (1u32 << self.arity)) - 1;
        }
    }
}

fn word_count(arity: u32) -> usize {
    if arity < 6 {
        1
    } else {
        1usize << (arity - 6)
    }
}

fn check_storable(arity: u32) -> Result<()> {
    if arity == 0 {
        return Err(Error::invalid("arity", "must be at least 1"));
    }
    if arity > MAX_TABLE_ARITY {
        return Err(Error::ExhaustiveBoundExceeded {
            arity,
            limit: MAX_TABLE_ARITY,
        });
    }
    Ok(())
}

pub(crate) fn check_exhaustive(arity: u32, limit: u32) -> Result<()> {
    if arity > limit {
        return Err(Error::ExhaustiveBoundExceeded { arity, limit });
    }
    Ok(())
}

/// Harm of one output against a critical threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmOutcome {
    pub harm: f64,
    pub critical_threshold: f64,
    pub catastrophic: bool,
}

impl HarmOutcome {
    pub fn new(harm: f64, critical_threshold: f64) -> Result<Self> {
        if !(harm >= 0.0) || !(critical_threshold >= 0.0) {
            return Err(Error::invalid(
                "harm",
                format!("harm {harm} and threshold {critical_threshold} must be non-negative"),
            ));
        }
        Ok(Self {
            harm,
            critical_threshold,
            catastrophic: harm > critical_threshold,
        })
    }
}

/// Exact alignment error: catastrophic inputs over the domain size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentError {
    pub unsafe_inputs: u64,
    pub arity: u32,
}

impl AlignmentError {
    pub fn domain_size(&self) -> u64 {
        1u64 << self.arity
    }

    /// Exact for every arity up to 53.
    pub fn value(&self) -> f64 {
        self.unsafe_inputs as f64 / self.domain_size() as f64
    }

    pub fn is_zero(&self) -> bool {
        self.unsafe_inputs == 0
    }

    /// `error <= eps`, compared without rounding: `eps * 2^m` is exact.
    pub fn at_most(&self, eps: f64) -> bool {
        (self.unsafe_inputs as f64) <= eps * self.domain_size() as f64
    }
}

pub fn alignment_error_exact(policy: &BooleanPolicy) -> Result<AlignmentError> {
    alignment_error_with_limit(policy, DEFAULT_EXHAUSTIVE_LIMIT)
}

pub fn alignment_error_with_limit(policy: &BooleanPolicy, limit: u32) -> Result<AlignmentError> {
    check_exhaustive(policy.arity, limit)?;
    Ok(AlignmentError {
        unsafe_inputs: policy.count_catastrophic(),
        arity: policy.arity,
    })
}

/// Whether the policy's alignment error is at most `eps`.
pub fn is_eps_safe(policy: &BooleanPolicy, eps: f64) -> Result<bool> {
    if eps.is_nan() {
        return Err(Error::invalid("eps", "NaN"));
    }
    Ok(alignment_error_exact(policy)?.at_most(eps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_table_is_error_free() {
        let p = BooleanPolicy::zeros(3).unwrap();
        assert_eq!(alignment_error_exact(&p).unwrap().value(), 0.0);
        assert!(is_eps_safe(&p, 0.0).unwrap());
    }

    #[test]
    fn full_table_has_error_one() {
        let p = BooleanPolicy::ones(1).unwrap();
        assert_eq!(alignment_error_exact(&p).unwrap().value(), 1.0);
    }

    #[test]
    fn unsafe_where_x1_false() {
        // x1 is false only on input 0
        let p = BooleanPolicy::from_fn(1, |x| x & 1 == 0).unwrap();
        assert_eq!(alignment_error_exact(&p).unwrap().value(), 0.5);
    }

    #[test]
    fn single_bit_thresholds() {
        let p = BooleanPolicy::with_catastrophic(4, [9]).unwrap();
        assert!(!is_eps_safe(&p, 1.0 / 32.0).unwrap());
        assert!(is_eps_safe(&p, 1.0 / 16.0).unwrap());
    }

    #[test]
    fn limit_is_enforced() {
        let p = BooleanPolicy::zeros(25).unwrap();
        assert_eq!(
            alignment_error_exact(&p),
            Err(Error::ExhaustiveBoundExceeded { arity: 25, limit: 24 })
        );
        assert!(alignment_error_with_limit(&p, 25).is_ok());
    }

    #[test]
    fn tail_bits_are_masked() {
        let p = BooleanPolicy::from_words(2, vec![!0]).unwrap();
        assert_eq!(p.count_catastrophic(), 4);
        assert_eq!(BooleanPolicy::ones(5).unwrap().count_catastrophic(), 32);
    }

    #[test]
    fn first_and_all_catastrophic() {
        let p = BooleanPolicy::with_catastrophic(8, [200, 7, 64]).unwrap();
        assert_eq!(p.first_catastrophic(), Some(7));
        assert_eq!(p.catastrophic_inputs().collect::<Vec<_>>(), vec![7, 64, 200]);
        assert_eq!(BooleanPolicy::zeros(8).unwrap().first_catastrophic(), None);
    }

    #[test]
    fn harm_threshold_is_strict() {
        assert!(!HarmOutcome::new(1.0, 1.0).unwrap().catastrophic);
        assert!(HarmOutcome::new(1.5, 1.0).unwrap().catastrophic);
        assert!(HarmOutcome::new(-1.0, 0.0).is_err());
    }
}
