//! Parameter points and uniform box priors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A named point in parameter space, in natural units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    values: Vec<f64>,
    names: Vec<String>,
}

impl ParamPoint {
    pub fn new<S: Into<String>>(
        values: Vec<f64>,
        names: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if values.is_empty() {
            return Err(invalid("parameter point must have at least one coordinate"));
        }
        if values.len() != names.len() {
            return Err(invalid(format!(
                "{} values but {} names",
                values.len(),
                names.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite parameter value {v}")));
        }
        Ok(Self { values, names })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

/// Independent uniform priors on each coordinate, `[lows[i], highs[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformBoxPrior {
    lows: Vec<f64>,
    highs: Vec<f64>,
}

impl UniformBoxPrior {
    pub fn new(lows: Vec<f64>, highs: Vec<f64>) -> Result<Self> {
        if lows.is_empty() || lows.len() != highs.len() {
            return Err(invalid(
                "prior bounds must be non-empty and of equal length",
            ));
        }
        for (i, (lo, hi)) in lows.iter().zip(&highs).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid(format!(
                    "prior bound {i}: need low < high, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lows, highs })
    }

    pub fn lows(&self) -> &[f64] {
        &self.lows
    }

    pub fn highs(&self) -> &[f64] {
        &self.highs
    }

    pub fn dim(&self) -> usize {
        self.lows.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lows.iter().zip(&self.highs))
                .all(|(t, (lo, hi))| t >= lo && t <= hi)
    }

    /// Draws one point from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lows
            .iter()
            .zip(&self.highs)
            .map(|(lo, hi)| {
                let u: f64 = rng.random();
                // lo + u*(hi-lo) can round up to hi for tiny boxes
                let v = lo + u * (hi - lo);
                if v >= *hi {
                    *lo
                } else {
                    v
                }
            })
            .collect()
    }
}

/// Draws a named parameter point from `prior`.
pub fn prior_sample<R: Rng + ?Sized, S: AsRef<str>>(
    prior: &UniformBoxPrior,
    names: &[S],
    rng: &mut R,
) -> Result<ParamPoint> {
    ParamPoint::new(
        prior.sample(rng),
        names.iter().map(|s| s.as_ref().to_string()),
    )
}
