use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{alignment_error_exact, check_exhaustive, AlignmentError, BooleanPolicy, DEFAULT_EXHAUSTIVE_LIMIT};

/// A finite set of audited inputs over an `arity`-bit domain; the expected
/// behaviour on every audited input is "safe".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawAuditSuite")]
pub struct AuditSuite {
    arity: u32,
    inputs: Vec<u64>,
}

/// JSON form: `{"arity": m, "inputs": [indices]}`.
#[derive(Deserialize)]
struct RawAuditSuite {
    arity: u32,
    inputs: Vec<u64>,
}

impl TryFrom<RawAuditSuite> for AuditSuite {
    type Error = Error;

    fn try_from(raw: RawAuditSuite) -> Result<Self> {
        Self::new(raw.arity, raw.inputs)
    }
}

impl AuditSuite {
    /// Sorts and de-duplicates `inputs`; every index must lie in the domain.
    pub fn new(arity: u32, mut inputs: Vec<u64>) -> Result<Self> {
        check_exhaustive(arity, DEFAULT_EXHAUSTIVE_LIMIT)?;
        inputs.sort_unstable();
        inputs.dedup();
        if let Some(&x) = inputs.last() {
            if x >> arity != 0 {
                return Err(Error::invalid("inputs", format!("index {x} outside a {arity}-bit domain")));
            }
        }
        Ok(Self { arity, inputs })
    }

    /// The first `count` inputs, `0..count`.
    pub fn prefix(arity: u32, count: u64) -> Result<Self> {
        Self::new(arity, (0..count).collect())
    }

    pub fn arity(&self) -> u32 {
        self.arity
    }

    pub fn inputs(&self) -> &[u64] {
        &self.inputs
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn contains(&self, x: u64) -> bool {
        self.inputs.binary_search(&x).is_ok()
    }

    pub fn covers_domain(&self) -> bool {
        self.inputs.len() as u64 == 1u64 << self.arity
    }
}

/// An all-safe policy with a single catastrophic trigger.
#[derive(Debug, Clone, PartialEq)]
pub struct BackdoorPolicy {
    pub policy: BooleanPolicy,
    pub trigger: u64,
}

pub fn build_audit_evader(audit: &AuditSuite, x_star: u64) -> Result<BackdoorPolicy> {
    if audit.covers_domain() {
        return Err(Error::Precondition("no untested input exists".into()));
    }
    if x_star >> audit.arity() != 0 {
        return Err(Error::invalid("x_star", "outside the input domain"));
    }
    if audit.contains(x_star) {
        return Err(Error::Precondition(format!("trigger {x_star} is audited")));
    }
    Ok(BackdoorPolicy {
        policy: BooleanPolicy::with_catastrophic(audit.arity(), [x_star])?,
        trigger: x_star,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditOutcome {
    pub audited: u64,
    pub passed: u64,
    pub passes_all: bool,
    pub alignment_error: AlignmentError,
}

/// Replays the audit: an input passes when the policy is safe there.
pub fn run_audit(policy: &BooleanPolicy, audit: &AuditSuite) -> Result<AuditOutcome> {
    if policy.arity() != audit.arity() {
        return Err(Error::DimensionMismatch {
            expected: audit.arity() as usize,
            actual: policy.arity() as usize,
        });
    }
    let passed = audit.inputs().iter().filter(|&&x| !policy.is_catastrophic(x)).count() as u64;
    Ok(AuditOutcome {
        audited: audit.len() as u64,
        passed,
        passes_all: passed == audit.len() as u64,
        alignment_error: alignment_error_exact(policy)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evader_passes_prefix_audit() {
        let audit = AuditSuite::prefix(10, 512).unwrap();
        let b = build_audit_evader(&audit, 1000).unwrap();
        let out = run_audit(&b.policy, &audit).unwrap();
        assert!(out.passes_all);
        assert_eq!(out.passed, 512);
        assert!(b.policy.is_catastrophic(1000));
        assert_eq!(out.alignment_error.unsafe_inputs, 1);
    }

    #[test]
    fn audited_trigger_is_rejected() {
        let audit = AuditSuite::prefix(4, 3).unwrap();
        assert!(build_audit_evader(&audit, 2).is_err());
    }

    #[test]
    fn full_audit_leaves_no_room() {
        let audit = AuditSuite::prefix(3, 8).unwrap();
        assert!(matches!(build_audit_evader(&audit, 9), Err(Error::Precondition(_))));
    }

    #[test]
    fn empty_audit_passes_vacuously() {
        let audit = AuditSuite::new(3, vec![]).unwrap();
        let b = build_audit_evader(&audit, 0).unwrap();
        let out = run_audit(&b.policy, &audit).unwrap();
        assert!(out.passes_all);
        assert_eq!(out.audited, 0);
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        assert!(AuditSuite::new(3, vec![8]).is_err());
    }
}
