//! Training triples, CDF estimators, Neyman confidence sets and explicit
//! coverage checks.
//!
//! The pieces fit together as follows. [`make_training_set`] turns a
//! [`Problem`](crate::Problem) into `(Z, λ0, θ)` triples whose regression
//! `E[Z | λ0, θ]` is the statistic CDF `P(λ ≤ λ0 | θ)`. A
//! [`CdfEstimate`] (network- or histogram-backed) approximates that
//! function; [`confidence_set`] thresholds it on a parameter grid for an
//! observed dataset, and [`coverage`] replays simulated datasets at a fixed
//! `θ` to count how often the set would contain it.

mod contour;
mod coverage;
mod estimator;
mod histogram;
mod sets;
mod triples;

pub use contour::{extract_contours, Polyline};
pub use coverage::{coverage, coverage_many, CoverageReport, CoverageRow};
pub use estimator::{cdf_eval, network_features, CdfEstimate, CdfEstimator, CdfEval, NetworkCdf};
pub use histogram::HistogramCdf;
pub use sets::{confidence_set, ConfidenceSet, GridSpec};
pub use triples::{
    make_observed_triples, make_training_set, training_dataset, ShuffleMode, TrainingSet,
    TrainingTriple,
};
