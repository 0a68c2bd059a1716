//! Diagonalization against a registry of alignment techniques.
//!
//! Inputs are pairs `(i, y)` packed as `x = (i << data_bits) | y`. Slice `i`
//! (1-based) is reserved for technique `A_i`: there the diagonal policy
//! outputs the opposite of what `A_i` makes of the all-safe baseline. Slice 0
//! and slices past the registry carry no technique and are safe.
//!
//! Techniques are black-box table-to-table maps, which is what lets the
//! diagonal policy simulate them exactly; techniques that inspect a policy's
//! own description are outside this construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{alignment_error_exact, check_exhaustive, AlignmentError, BooleanPolicy, DEFAULT_EXHAUSTIVE_LIMIT};

pub trait AlignmentTechnique: Send + Sync {
    fn name(&self) -> String;
    /// Must be total and deterministic.
    fn apply(&self, policy: &BooleanPolicy) -> BooleanPolicy;
}

/// Clamps the output on odd inputs to safe.
#[derive(Debug, Clone, Copy, Default)]
pub struct OutputClamp;

impl AlignmentTechnique for OutputClamp {
    fn name(&self) -> String {
        "output-clamp".into()
    }

    fn apply(&self, policy: &BooleanPolicy) -> BooleanPolicy {
        let words = policy.words().iter().map(|w| w & 0x5555_5555_5555_5555).collect();
        BooleanPolicy::from_words(policy.arity(), words).expect("same shape")
    }
}

/// Patches a fixed finite list of inputs (`0..patched`) to safe.
#[derive(Debug, Clone, Copy)]
pub struct FinitePatch {
    pub patched: u64,
}

impl Default for FinitePatch {
    fn default() -> Self {
        Self { patched: 16 }
    }
}

impl AlignmentTechnique for FinitePatch {
    fn name(&self) -> String {
        format!("finite-patch({})", self.patched)
    }

    fn apply(&self, policy: &BooleanPolicy) -> BooleanPolicy {
        let mut p = policy.clone();
        for x in 0..self.patched.min(p.domain_size()) {
            p.set(x, false).expect("in range");
        }
        p
    }
}

/// Audits every `stride`-th input and retrains (patches) the failures found.
#[derive(Debug, Clone, Copy)]
pub struct RetrainOnAudit {
    pub stride: u64,
}

impl Default for RetrainOnAudit {
    fn default() -> Self {
        Self { stride: 4 }
    }
}

impl AlignmentTechnique for RetrainOnAudit {
    fn name(&self) -> String {
        format!("retrain-on-audit(every {})", self.stride)
    }

    fn apply(&self, policy: &BooleanPolicy) -> BooleanPolicy {
        let mut p = policy.clone();
        let stride = self.stride.max(1);
        let mut x = 0;
        while x < p.domain_size() {
            if p.is_catastrophic(x) {
                p.set(x, false).expect("in range");
            }
            x += stride;
        }
        p
    }
}

/// Returns the policy unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl AlignmentTechnique for Identity {
    fn name(&self) -> String {
        "identity".into()
    }

    fn apply(&self, policy: &BooleanPolicy) -> BooleanPolicy {
        policy.clone()
    }
}

/// Replaces any policy with the all-safe policy.
#[derive(Debug, Clone, Copy, Default)]
pub struct EraseAll;

impl AlignmentTechnique for EraseAll {
    fn name(&self) -> String {
        "erase-all".into()
    }

    fn apply(&self, policy: &BooleanPolicy) -> BooleanPolicy {
        BooleanPolicy::zeros(policy.arity()).expect("same shape")
    }
}

/// Knows the construction and overwrites slice `slice` with safe outputs.
#[derive(Debug, Clone, Copy)]
pub struct SliceOverwrite {
    pub slice: u64,
    pub data_bits: u32,
}

impl AlignmentTechnique for SliceOverwrite {
    fn name(&self) -> String {
        format!("slice-overwrite({})", self.slice)
    }

    fn apply(&self, policy: &BooleanPolicy) -> BooleanPolicy {
        let mut p = policy.clone();
        let lo = self.slice << self.data_bits;
        for y in 0..1u64 << self.data_bits {
            if lo + y < p.domain_size() {
                p.set(lo + y, false).expect("in range");
            }
        }
        p
    }
}

#[derive(Default)]
pub struct TechniqueRegistry {
    techniques: Vec<Box<dyn AlignmentTechnique>>,
}

impl TechniqueRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Output clamping, finite patching and retrain-on-audit.
    pub fn shipped() -> Self {
        Self::new()
            .with(OutputClamp)
            .with(FinitePatch::default())
            .with(RetrainOnAudit::default())
    }

    pub fn with(mut self, t: impl AlignmentTechnique + 'static) -> Self {
        self.techniques.push(Box::new(t));
        self
    }

    pub fn len(&self) -> usize {
        self.techniques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.techniques.is_empty()
    }

    /// Technique `A_index`, 1-based.
    pub fn get(&self, index: u64) -> Option<&dyn AlignmentTechnique> {
        let i = usize::try_from(index).ok()?.checked_sub(1)?;
        self.techniques.get(i).map(|t| t.as_ref())
    }

    pub fn names(&self) -> Vec<String> {
        self.techniques.iter().map(|t| t.name()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPolicy {
    pub policy: BooleanPolicy,
    pub slice_bits: u32,
    pub data_bits: u32,
    pub registry_len: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagonalOutput {
    pub catastrophic: bool,
    /// False for slice 0 and slices past the registry (safe by default).
    pub in_registry: bool,
}

impl DiagonalPolicy {
    pub fn encode(&self, slice: u64, y: u64) -> u64 {
        (slice << self.data_bits) | y
    }

    pub fn decode(&self, x: u64) -> (u64, u64) {
        (x >> self.data_bits, x & ((1u64 << self.data_bits) - 1))
    }

    pub fn evaluate(&self, slice: u64, y: u64) -> Result<DiagonalOutput> {
        if slice >> self.slice_bits != 0 || y >> self.data_bits != 0 {
            return Err(Error::invalid("input", "(slice, y) outside the domain"));
        }
        Ok(DiagonalOutput {
            catastrophic: self.policy.is_catastrophic(self.encode(slice, y)),
            in_registry: (1..=self.registry_len).contains(&slice),
        })
    }
}

/// Builds `pi*(i, y) = 1 - A_i(pi_safe)(i, y)` for every registered `i`.
pub fn diagonal_policy(registry: &TechniqueRegistry, slice_bits: u32, data_bits: u32) -> Result<DiagonalPolicy> {
    if registry.is_empty() {
        return Err(Error::Precondition("technique registry is empty".into()));
    }
    let arity = slice_bits + data_bits;
    if arity == 0 {
        return Err(Error::invalid("slice_bits", "domain is empty"));
    }
    check_exhaustive(arity, DEFAULT_EXHAUSTIVE_LIMIT)?;
    let slices = 1u64 << slice_bits;
    let n = registry.len() as u64;
    if slices <= n {
        return Err(Error::invalid(
            "slice_bits",
            format!("{slices} slices cannot hold slice 0 plus {n} techniques"),
        ));
    }
    let baseline = BooleanPolicy::zeros(arity)?;
    let mut table = BooleanPolicy::zeros(arity)?;
    for i in 1..=n {
        let image = registry.get(i).expect("in range").apply(&baseline);
        for y in 0..1u64 << data_bits {
            let x = (i << data_bits) | y;
            table.set(x, !image.is_catastrophic(x))?;
        }
    }
    Ok(DiagonalPolicy {
        policy: table,
        slice_bits,
        data_bits,
        registry_len: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub input: u64,
    pub slice: u64,
    pub y: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueVerdict {
    pub index: u64,
    pub name: String,
    /// `eps(A_i(pi*))` over the whole domain.
    pub error: AlignmentError,
    pub own_slice_unsafe: u64,
    /// True when `A_i(pi*)` is safe on all of slice `i`.
    pub aligned_on_own_slice: bool,
    /// Lowest unsafe input of `A_i(pi*)` in slice `i`, else anywhere.
    pub witness: Option<Witness>,
    pub trace: Vec<String>,
}

impl TechniqueVerdict {
    pub fn unaligned(&self) -> bool {
        !self.error.is_zero()
    }
}

/// Applies every technique to the diagonal policy and looks for unsafe
/// outputs, preferring witnesses in the technique's own slice.
pub fn check_diagonalization(registry: &TechniqueRegistry, diagonal: &DiagonalPolicy) -> Result<Vec<TechniqueVerdict>> {
    if registry.len() as u64 != diagonal.registry_len {
        return Err(Error::DimensionMismatch {
            expected: diagonal.registry_len as usize,
            actual: registry.len(),
        });
    }
    let arity = diagonal.policy.arity();
    let baseline = BooleanPolicy::zeros(arity)?;
    let width = 1u64 << diagonal.data_bits;
    (1..=diagonal.registry_len)
        .map(|i| {
            let technique = registry.get(i).expect("in range");
            let aligned = technique.apply(&diagonal.policy);
            if aligned.arity() != arity {
                return Err(Error::DimensionMismatch {
                    expected: arity as usize,
                    actual: aligned.arity() as usize,
                });
            }
            let lo = i * width;
            let own: Vec<u64> = (lo..lo + width).filter(|&x| aligned.is_catastrophic(x)).collect();
            let input = own.first().copied().or_else(|| aligned.first_catastrophic());
            let witness = input.map(|x| {
                let (slice, y) = diagonal.decode(x);
                Witness { input: x, slice, y }
            });
            let trace = witness
                .map(|w| {
                    let (s, y) = (w.slice, w.y);
                    let o = technique.apply(&baseline).is_catastrophic(w.input);
                    vec![
                        format!("A_{s}(pi_safe)({s}, {y}) = {}", u8::from(o)),
                        format!("pi*({s}, {y}) = {}", u8::from(diagonal.policy.is_catastrophic(w.input))),
                        format!("A_{i}(pi*)({s}, {y}) = 1"),
                    ]
                })
                .unwrap_or_default();
            Ok(TechniqueVerdict {
                index: i,
                name: technique.name(),
                error: alignment_error_exact(&aligned)?,
                own_slice_unsafe: own.len() as u64,
                aligned_on_own_slice: own.is_empty(),
                witness,
                trace,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_slice_is_all_unsafe() {
        let r = TechniqueRegistry::new().with(Identity);
        let d = diagonal_policy(&r, 1, 4).unwrap();
        for y in 0..16 {
            assert!(d.evaluate(1, y).unwrap().catastrophic);
            assert!(!d.evaluate(0, y).unwrap().catastrophic);
        }
    }

    #[test]
    fn eraser_slice_is_all_unsafe() {
        let r = TechniqueRegistry::new().with(EraseAll);
        let d = diagonal_policy(&r, 1, 3).unwrap();
        assert_eq!(d.policy.count_catastrophic(), 8);
    }

    #[test]
    fn empty_registry_is_rejected() {
        let err = diagonal_policy(&TechniqueRegistry::new(), 2, 4);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn needs_room_for_every_slice() {
        let r = TechniqueRegistry::shipped();
        assert!(diagonal_policy(&r, 1, 4).is_err());
        assert!(diagonal_policy(&r, 2, 4).is_ok());
    }

    #[test]
    fn out_of_registry_slices_are_safe_and_flagged() {
        let r = TechniqueRegistry::new().with(Identity);
        let d = diagonal_policy(&r, 2, 3).unwrap();
        let out = d.evaluate(3, 5).unwrap();
        assert!(!out.catastrophic);
        assert!(!out.in_registry);
    }

    #[test]
    fn shipped_techniques_stay_unaligned() {
        let r = TechniqueRegistry::shipped();
        let d = diagonal_policy(&r, 2, 6).unwrap();
        let v = check_diagonalization(&r, &d).unwrap();
        assert_eq!(v.len(), 3);
        for t in &v {
            assert!(t.unaligned(), "{}", t.name);
            let w = t.witness.unwrap();
            assert_eq!(w.slice, t.index);
            assert_eq!(t.trace.len(), 3);
        }
    }

    #[test]
    fn construction_aware_overwrite_aligns_its_slice() {
        let r = TechniqueRegistry::new().with(SliceOverwrite { slice: 1, data_bits: 4 });
        let d = diagonal_policy(&r, 1, 4).unwrap();
        let v = check_diagonalization(&r, &d).unwrap();
        assert!(v[0].aligned_on_own_slice);
        assert!(!v[0].unaligned());
    }
}
