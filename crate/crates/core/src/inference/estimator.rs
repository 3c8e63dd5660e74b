use serde::{Deserialize, Serialize};

use super::histogram::HistogramCdf;
use crate::error::{invalid, Error, Result};
use crate::nn::MlpModel;
use crate::params::UniformBoxPrior;
use crate::toy::GaussianToy;

/// An approximation of `P(λ ≤ λ0 | θ)`.
///
/// Batch inputs are one `λ0` per row and row-major parameter vectors of
/// length [`dim`](Self::dim). A `NaN` output marks an invalid estimate
/// (an empty histogram bin, say) which is never included in a set.
pub trait CdfEstimator: Sync {
    fn dim(&self) -> usize;

    fn cdf_batch(&self, lambda0: &[f64], thetas: &[f64]) -> Result<Vec<f64>>;

    /// Region where the estimate is backed by training data.
    fn domain(&self) -> Option<&UniformBoxPrior> {
        None
    }

    fn cdf(&self, lambda0: f64, theta: &[f64]) -> Result<f64> {
        Ok(self.cdf_batch(&[lambda0], theta)?[0])
    }
}

pub(crate) fn check_batch(dim: usize, lambda0: &[f64], thetas: &[f64]) -> Result<()> {
    if thetas.len() != lambda0.len() * dim {
        return Err(Error::Dimension {
            expected: lambda0.len() * dim,
            got: thetas.len(),
        });
    }
    Ok(())
}

/// Network inputs `[λ0, θ...]` for a batch, row-major.
pub fn network_features(lambda0: &[f64], thetas: &[f64], dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(lambda0.len() * (dim + 1));
    for (l, t) in lambda0.iter().zip(thetas.chunks_exact(dim.max(1))) {
        out.push(*l);
        out.extend_from_slice(t);
    }
    out
}

/// A trained regression network with the prior box it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCdf {
    pub names: Vec<String>,
    pub domain: UniformBoxPrior,
    pub model: MlpModel,
}

impl NetworkCdf {
    pub fn new(names: Vec<String>, domain: UniformBoxPrior, model: MlpModel) -> Result<Self> {
        if names.len() != domain.dim() || model.inputs() != domain.dim() + 1 {
            return Err(invalid(format!(
                "network takes {} inputs but the domain has {} parameters",
                model.inputs(),
                domain.dim()
            )));
        }
        Ok(Self {
            names,
            domain,
            model,
        })
    }
}

/// A serializable CDF estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CdfEstimate {
    Network(NetworkCdf),
    Histogram(HistogramCdf),
    /// The same value everywhere.
    Constant {
        dim: usize,
        value: f64,
    },
    /// The analytic CDF of [`GaussianToy`].
    GaussianExact,
}

impl CdfEstimate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl CdfEstimator for CdfEstimate {
    fn dim(&self) -> usize {
        match self {
            Self::Network(n) => n.domain.dim(),
            Self::Histogram(h) => h.dim(),
            Self::Constant { dim, .. } => *dim,
            Self::GaussianExact => 1,
        }
    }

    fn domain(&self) -> Option<&UniformBoxPrior> {
        match self {
            Self::Network(n) => Some(&n.domain),
            Self::Histogram(h) => Some(h.domain()),
            _ => None,
        }
    }

    fn cdf_batch(&self, lambda0: &[f64], thetas: &[f64]) -> Result<Vec<f64>> {
        let dim = self.dim();
        check_batch(dim, lambda0, thetas)?;
        Ok(match self {
            Self::Network(n) => n.model.forward(&network_features(lambda0, thetas, dim))?,
            Self::Histogram(h) => thetas.chunks_exact(dim).map(|t| h.value(t)).collect(),
            Self::Constant { value, .. } => vec![*value; lambda0.len()],
            Self::GaussianExact => lambda0
                .iter()
                .zip(thetas)
                .map(|(l, t)| GaussianToy::exact_cdf(*l, *t))
                .collect(),
        })
    }
}

/// A single estimate together with an extrapolation flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfEval {
    pub value: f64,
    /// `theta` lies outside the estimator's domain. Network values are
    /// still returned; histogram values are `NaN`.
    pub extrapolated: bool,
}

pub fn cdf_eval<E: CdfEstimator + ?Sized>(est: &E, lambda0: f64, theta: &[f64]) -> Result<CdfEval> {
    if theta.len() != est.dim() {
        return Err(Error::Dimension {
            expected: est.dim(),
            got: theta.len(),
        });
    }
    let extrapolated = est.domain().is_some_and(|d| !d.contains(theta));
    Ok(CdfEval {
        value: est.cdf(lambda0, theta)?,
        extrapolated,
    })
}
