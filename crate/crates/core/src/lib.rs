//! Amortized likelihood-free frequentist inference.
//!
//! A small regression network learns the conditional CDF
//! `P(λ ≤ λ0 | θ)` of a test statistic from simulated training triples.
//! Thresholding that CDF at a confidence level gives Neyman confidence
//! sets for any observed dataset, and the same network checks their
//! coverage directly by Monte Carlo.

// `!(x > 0.0)` is the idiom here for rejecting NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cosmo;
pub mod error;
pub mod inference;
pub mod nn;
pub mod onoff;
pub mod optim;
pub mod params;
pub mod problem;
pub mod rng;
pub mod sir;
pub mod specfun;
pub mod toy;

pub use error::{Error, Result};
pub use params::{prior_sample, ParamPoint, UniformBoxPrior};
pub use problem::Problem;
pub use rng::{derive_stream, SeedSpec, Stream};

// Runs the guide's and the README's snippets as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/triples.md")]
    mod triples {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/sets.md")]
    mod sets {}
    #[doc = include_str!("../../../book/src/coverage.md")]
    mod coverage {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
