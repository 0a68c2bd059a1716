//! Desk-scale laboratory for safety-verification impossibility results.
//!
//! Each module implements one family of constructions or calculators:
//!
//! - [`policy`]: Boolean truth-table, linear threshold and ReLU policies,
//!   harm evaluation and exact/estimated alignment error.
//! - [`verification`]: formula parsing, the tautology-to-safety reduction,
//!   exhaustive and threshold verifiers, and the verification-cost benchmark.
//! - [`scarcity`]: counting and sampling demonstrations of how rare safe
//!   policies are.
//! - [`geometry`]: ReLU safety margins, escape perturbations, training paths
//!   against thin safe sets and gradient anti-alignment.
//! - [`learning`]: rare-event sample complexity, the PAC-Bayes lower bound and
//!   posterior experiments.
//! - [`adversarial`]: audit evaders, keyed-hash trap policies, diagonalization
//!   against a technique registry, stakeholder-union coverage.
//! - [`crs`]: the capability-risk scaling model and its calculators.
//!
//! Every randomized operation takes a [`SeedStream`]; results are
//! bit-identical for a given seed regardless of thread count.

#![forbid(unsafe_code)]

pub mod adversarial;
pub mod crs;
pub mod error;
pub mod geometry;
pub mod learning;
pub mod policy;
pub mod scarcity;
pub mod seed;
pub mod stats;
pub mod verification;

pub use error::{Error, Result};
pub use seed::SeedStream;
