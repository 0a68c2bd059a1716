//! The tautology-to-safety reduction and exhaustive verifiers.
//!
//! [`policy_from_formula`] maps a formula `phi` over `k` variables to the
//! policy that is catastrophic exactly on the assignments falsifying `phi`.
//! The policy is perfectly safe iff `phi` is a tautology, and any
//! non-tautology leaves at least one unsafe input, i.e. error `>= 2^-k`.

mod formula;
mod scaling;

pub use formula::{parse_dimacs, parse_formula, random_formula, random_kcnf, to_dimacs, Formula, ParseError, PropositionalFormula};
pub use scaling::{
    measure_verification_scaling, negated_unsat_instance, ScalingOptions, ScalingReport, ScalingRow,
    CLAUSE_RATIO,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{alignment_error_exact, check_exhaustive, AlignmentError, BooleanPolicy, DEFAULT_EXHAUSTIVE_LIMIT};

/// A policy together with the formula it was reduced from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionPolicy {
    pub policy: BooleanPolicy,
    pub source: PropositionalFormula,
}

pub fn policy_from_formula(formula: &PropositionalFormula) -> Result<ReductionPolicy> {
    let k = formula.num_vars();
    check_exhaustive(k, DEFAULT_EXHAUSTIVE_LIMIT)?;
    let blocks = if k < 6 { 1 } else { 1u64 << (k - 6) };
    let words = (0..blocks).map(|b| !formula.root().eval_block(b)).collect();
    Ok(ReductionPolicy {
        policy: BooleanPolicy::from_words(k, words)?,
        source: formula.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SafetyVerdict {
    Safe,
    /// Lowest-index catastrophic input.
    Counterexample { input: u64 },
}

impl SafetyVerdict {
    pub fn is_safe(&self) -> bool {
        matches!(self, SafetyVerdict::Safe)
    }
}

/// Exhaustive check for zero alignment error.
pub fn verify_perfect_safety(policy: &BooleanPolicy) -> Result<SafetyVerdict> {
    check_exhaustive(policy.arity(), DEFAULT_EXHAUSTIVE_LIMIT)?;
    Ok(match policy.first_catastrophic() {
        None => SafetyVerdict::Safe,
        Some(input) => SafetyVerdict::Counterexample { input },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum EpsVerdict {
    EpsSafe { error: AlignmentError },
    Violation { error: AlignmentError },
}

impl EpsVerdict {
    pub fn is_eps_safe(&self) -> bool {
        matches!(self, EpsVerdict::EpsSafe { .. })
    }

    pub fn error(&self) -> AlignmentError {
        match *self {
            EpsVerdict::EpsSafe { error } | EpsVerdict::Violation { error } => error,
        }
    }
}

/// Threshold check `error <= eps` for `eps` in `[0, 1]`.
pub fn verify_eps_safety(policy: &BooleanPolicy, eps: f64) -> Result<EpsVerdict> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid("eps", format!("{eps} outside [0, 1]")));
    }
    let error = alignment_error_exact(policy)?;
    Ok(if error.at_most(eps) {
        EpsVerdict::EpsSafe { error }
    } else {
        EpsVerdict::Violation { error }
    })
}

/// The largest threshold at which the reduction still separates tautologies
/// from non-tautologies: `2^-(k+1)`.
pub fn separating_threshold(num_vars: u32) -> f64 {
    0.5f64.powi(num_vars as i32 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reduce(text: &str) -> ReductionPolicy {
        policy_from_formula(&parse_formula(text).unwrap()).unwrap()
    }

    #[test]
    fn tautology_reduces_to_safe_policy() {
        let r = reduce("x1 | !x1");
        assert_eq!(alignment_error_exact(&r.policy).unwrap().value(), 0.0);
        assert_eq!(verify_perfect_safety(&r.policy).unwrap(), SafetyVerdict::Safe);
    }

    #[test]
    fn conjunction_error_is_three_quarters() {
        let r = reduce("x1 & x2");
        assert_eq!(alignment_error_exact(&r.policy).unwrap().value(), 0.75);
        assert_eq!(
            verify_perfect_safety(&r.policy).unwrap(),
            SafetyVerdict::Counterexample { input: 0 }
        );
    }

    #[test]
    fn single_variable_error_is_half() {
        assert_eq!(alignment_error_exact(&reduce("x1").policy).unwrap().value(), 0.5);
    }

    #[test]
    fn counterexample_is_lowest_index() {
        assert_eq!(
            verify_perfect_safety(&BooleanPolicy::zeros(5).unwrap()).unwrap(),
            SafetyVerdict::Safe
        );
        let p = BooleanPolicy::with_catastrophic(3, [7]).unwrap();
        assert_eq!(
            verify_perfect_safety(&p).unwrap(),
            SafetyVerdict::Counterexample { input: 7 }
        );
    }

    #[test]
    fn eps_threshold_separates_reductions() {
        let taut = reduce("(x1 & x2) | !x1 | !x2");
        assert!(verify_eps_safety(&taut.policy, separating_threshold(2)).unwrap().is_eps_safe());
        let non = reduce("(x1 & x2) | !x1");
        let v = verify_eps_safety(&non.policy, separating_threshold(2)).unwrap();
        assert!(!v.is_eps_safe());
        assert!(v.error().value() >= 0.25);
        assert!(verify_eps_safety(&BooleanPolicy::ones(3).unwrap(), 1.0).unwrap().is_eps_safe());
        assert!(verify_eps_safety(&non.policy, 1.5).is_err());
    }

    #[test]
    fn over_limit_is_rejected() {
        let f = PropositionalFormula::new(Formula::Var(25), 25).unwrap();
        assert!(matches!(
            policy_from_formula(&f),
            Err(Error::ExhaustiveBoundExceeded { .. })
        ));
    }
}
