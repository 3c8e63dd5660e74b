//! A one-parameter Gaussian location problem with a known statistic CDF.
//!
//! The dataset is a single draw `X ~ Normal(θ, 1)` and the statistic is
//! `λ = X`, so `P(λ ≤ λ0 | θ) = Φ(λ0 − θ)` exactly. It isolates the
//! learning and Neyman machinery from any model-specific difficulty.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::params::UniformBoxPrior;
use crate::problem::Problem;
use crate::rng::Stream;
use crate::specfun::normal_cdf;

#[derive(Debug, Clone)]
pub struct GaussianToy {
    prior: UniformBoxPrior,
}

impl GaussianToy {
    pub fn new(prior: UniformBoxPrior) -> Result<Self> {
        if prior.dim() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: prior.dim(),
            });
        }
        Ok(Self { prior })
    }

    /// `θ ~ Unif(−2, 2)`.
    pub fn default_prior() -> UniformBoxPrior {
        UniformBoxPrior::new(vec![-2.0], vec![2.0]).expect("static bounds")
    }

    /// The exact statistic CDF `Φ(λ0 − θ)`.
    pub fn exact_cdf(lambda0: f64, theta: f64) -> f64 {
        normal_cdf(lambda0 - theta)
    }
}

impl Default for GaussianToy {
    fn default() -> Self {
        Self {
            prior: Self::default_prior(),
        }
    }
}

impl Problem for GaussianToy {
    type Data = f64;

    fn param_names(&self) -> Vec<String> {
        vec!["theta".into()]
    }

    fn prior(&self) -> &UniformBoxPrior {
        &self.prior
    }

    fn simulate(&self, theta: &[f64], rng: &mut Stream) -> Result<f64> {
        let [t] = theta else {
            return Err(Error::Dimension {
                expected: 1,
                got: theta.len(),
            });
        };
        let eps: f64 = rng.sample(StandardNormal);
        Ok(t + eps)
    }

    fn statistic(&self, data: &f64, _theta: &[f64]) -> Result<f64> {
        Ok(*data)
    }
}
