//! Constructive counterexamples: audit-evading backdoors, keyed-hash trap
//! policies, diagonalization against technique registries, and the
//! coverage of unioned stakeholder constraints.

mod audit;
mod diagonal;
mod prf;
mod stakeholders;

pub use audit::{build_audit_evader, run_audit, AuditOutcome, AuditSuite, BackdoorPolicy};
pub use diagonal::{
    check_diagonalization, diagonal_policy, AlignmentTechnique, DiagonalOutput, DiagonalPolicy, EraseAll,
    FinitePatch, Identity, OutputClamp, RetrainOnAudit, SliceOverwrite, TechniqueRegistry, TechniqueVerdict,
    Witness,
};
pub use prf::{
    blackbox_detection_experiment, build_planted_trigger_policy, build_prf_policy, planted_trigger_search_cost,
    prf_trigger_fraction, random_key, trigger_set_disagreement, DetectionReport, KeyedPermutation, PrfPolicy,
    SearchCostReport, TriggerFraction, TriggerRule, FEISTEL_ROUNDS,
};
pub use stakeholders::{stakeholder_union_coverage, CoverageReport, CoverageStep, StakeholderSet};

use crate::error::{Error, Result};

/// `ceil(log2 d) + 2`.
pub fn crypto_threshold(d: u64) -> Result<u32> {
    if d == 0 {
        return Err(Error::invalid("d", "must be at least 1"));
    }
    let ceil_log2 = if d == 1 { 0 } else { 64 - (d - 1).leading_zeros() };
    Ok(ceil_log2 + 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_values() {
        assert_eq!(crypto_threshold(1).unwrap(), 2);
        assert_eq!(crypto_threshold(2).unwrap(), 3);
        assert_eq!(crypto_threshold(1000).unwrap(), 12);
        assert_eq!(crypto_threshold(1 << 16).unwrap(), 18);
        assert_eq!(crypto_threshold((1 << 16) + 1).unwrap(), 19);
        assert!(crypto_threshold(0).is_err());
    }
}
