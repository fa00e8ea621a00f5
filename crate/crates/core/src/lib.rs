//! Least-disagree-metric (LDM) estimation and LDM-seeded batch active learning.
//!
//! The crate is organised around the pieces of an active-learning loop:
//!
//! - [`model`]: small parametric classifiers (bias-free 2D linear, multinomial
//!   logistic, one-hidden-layer MLP) with training, prediction, penultimate
//!   features and Gaussian perturbation of the final layer.
//! - [`estimator`]: Monte-Carlo disagree fraction and the empirical LDM
//!   estimator, in per-point and shared-draw pool form.
//! - [`testbed`]: the 2D unit-disk world where disagreement and LDM have
//!   closed forms; used as an oracle throughout the test suite.
//! - [`acquisition`]: LDM-S weighting and seeding, plus Random, Entropy,
//!   Margin and Coreset baselines.
//! - [`stats`]: Spearman correlation, paired t-scores, penalty matrices and
//!   performance profiles.
//! - [`harness`]: datasets, configuration, the acquisition loop, JSONL
//!   records, verification suites and report generation.

pub mod acquisition;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod model;
pub mod rng;
pub mod stats;
pub mod testbed;

pub use error::{Error, Result};
