//! Scores, long-run covariance, dependent wild bootstrap and confidence bands.

pub mod bands;
pub mod bootstrap;
pub mod functional;
pub mod scores;

pub use bands::{
    bonferroni_bands, one_sided_test, pointwise_bands, pointwise_cvs, supt_bands, supt_test, BandKind,
    BandSet, TestResult,
};
pub use bootstrap::{wild_draws, DrawSet};
pub use functional::{evaluate, Coord, Functional, FunctionalDraws, Identification};
pub use scores::{compute_scores, default_bandwidth, hac, KernelKind, KernelScale, KernelSpec, ScoreForm, ScorePanel};
