//! Meta-evaluation of automatic evaluation metrics against human judgments.
//!
//! Scores for a metric are held as an `N x M` matrix (systems by inputs).
//! On top of that the crate provides:
//!
//! - system- and summary-level Pearson, Spearman and Kendall tau-b
//!   correlations ([`correl`]);
//! - Fisher-transformation and matrix-bootstrap confidence intervals ([`ci`]);
//! - one-tailed tests of whether one metric correlates better with the ground
//!   truth than another: Williams' test, three permutation schemes and a paired
//!   bootstrap, plus Bonferroni correction ([`hypo`]);
//! - CI-coverage and power simulation harnesses ([`sim`]).
//!
//! All randomized routines are keyed by a `u64` seed and use one
//! [`numerics::RngStream`] per iteration, so results do not depend on how
//! iterations are scheduled across threads.

pub mod ci;
pub mod correl;
mod error;
pub mod hypo;
pub mod numerics;
pub mod scores;
pub mod sim;

pub use error::{Error, Result};
