//! Weighted multiple hypothesis testing.
//!
//! Multiple testing procedures (Bonferroni, Holm, Benjamini-Hochberg) accept
//! a nonnegative weight for every hypothesis, subject to the budget that the
//! weights average to one. A test with weight `w` is judged against the
//! relaxed threshold `alpha * w / m`, so prior knowledge can be spent where
//! it helps without giving up familywise error control. This crate covers
//! the machinery around that idea:
//!
//! * tail-accurate normal distribution functions ([`distfn`]),
//! * core domain types and their TSV file formats ([`hypotheses`]),
//! * the weighted procedures behind a common registry ([`procedures`]),
//! * power formulas for weighted thresholds ([`power`]),
//! * power-optimal weight solving and its failure modes ([`optimal`]),
//! * robustness of binary weighting schemes to misplaced weight
//!   ([`robustness`]),
//! * design of two-level weighting schemes from power targets ([`designer`]),
//! * estimation of weights from grouped test statistics ([`estimator`]),
//! * a synthetic two-stage genome scan plus Monte Carlo harnesses
//!   ([`simulate`]).

pub mod designer;
pub mod distfn;
pub mod error;
pub mod estimator;
pub mod hypotheses;
pub mod optimal;
pub mod power;
pub mod procedures;
pub mod robustness;
pub mod simulate;

mod roots;

pub use error::{Error, Result};
