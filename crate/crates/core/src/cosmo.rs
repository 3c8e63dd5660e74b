//! Two-parameter phantom-energy cosmology fitted to Type Ia supernova
//! distance moduli.
//!
//! The equation of state `P = −b aⁿ Ω` with `b = n/3` gives the energy
//! density `Ω(a) = exp(aⁿ − 1) / a³`. In a flat universe the comoving
//! distance, the age and the Big-Rip time all reduce to lower incomplete
//! gamma functions of order `1/(2n)` or `3/(2n)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::params::UniformBoxPrior;
use crate::problem::Problem;
use crate::rng::{derive_stream, SeedSpec, Stream};
use crate::specfun::{gamma_fn, lower_incomplete_gamma};

/// Speed of light in km/s.
pub const SPEED_OF_LIGHT: f64 = 299_792.458;

/// Model parameters: equation-of-state exponent `n` and Hubble constant
/// `h0` in km/s/Mpc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosmoParams {
    pub n: f64,
    pub h0: f64,
}

impl CosmoParams {
    pub fn new(n: f64, h0: f64) -> Result<Self> {
        if !(n > 0.0 && n.is_finite() && h0 > 0.0 && h0.is_finite()) {
            return Err(domain(format!(
                "cosmology needs n > 0 and H0 > 0, got n={n}, H0={h0}"
            )));
        }
        Ok(Self { n, h0 })
    }

    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        match theta {
            [n, h0] => Self::new(*n, *h0),
            _ => Err(Error::Dimension {
                expected: 2,
                got: theta.len(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupernovaRecord {
    /// Redshift.
    pub z: f64,
    /// Measured distance modulus (mag).
    pub x: f64,
    /// Uncertainty on `x` (mag).
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupernovaCatalog {
    records: Vec<SupernovaRecord>,
}

impl SupernovaCatalog {
    pub fn new(records: Vec<SupernovaRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(invalid("supernova catalog is empty"));
        }
        for (i, r) in records.iter().enumerate() {
            if !(r.z > 0.0
                && r.sigma > 0.0
                && r.x.is_finite()
                && r.z.is_finite()
                && r.sigma.is_finite())
            {
                return Err(invalid(format!(
                    "record {i}: need z > 0, sigma > 0, finite x; got {r:?}"
                )));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[SupernovaRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Same redshifts and uncertainties, new distance moduli.
    pub fn with_moduli(&self, xs: impl IntoIterator<Item = f64>) -> Self {
        let records = self
            .records
            .iter()
            .zip(xs)
            .map(|(r, x)| SupernovaRecord { x, ..*r })
            .collect();
        Self { records }
    }
}

/// Dimensionless energy density `Ω(a) = exp(aⁿ − 1) / a³`.
pub fn omega(a: f64, theta: &CosmoParams) -> Result<f64> {
    if !(a > 0.0) {
        return Err(domain(format!("scale factor must be positive, got {a}")));
    }
    Ok((a.powf(theta.n) - 1.0).exp() / (a * a * a))
}

/// Per-parameter constants of the distance–redshift relation.
#[derive(Debug, Clone, Copy)]
pub struct DistanceModel {
    theta: CosmoParams,
    order: f64,
    gamma_today: f64,
    prefactor: f64,
}

impl DistanceModel {
    pub fn new(theta: CosmoParams) -> Result<Self> {
        let order = 1.0 / (2.0 * theta.n);
        let gamma_today = lower_incomplete_gamma(order, 0.5)?;
        let prefactor = 2f64.powf(order) * 0.5f64.exp() / theta.n;
        Ok(Self {
            theta,
            order,
            gamma_today,
            prefactor,
        })
    }

    /// Dimensionless comoving distance `u(z) = ∫_{1/(1+z)}^1 da / (a² √Ω(a))`.
    pub fn u(&self, z: f64) -> Result<f64> {
        if !(z >= 0.0) {
            return Err(domain(format!("redshift must be >= 0, got {z}")));
        }
        let x = 0.5 * (1.0 + z).powf(-self.theta.n);
        Ok(self.prefactor * (self.gamma_today - lower_incomplete_gamma(self.order, x)?))
    }

    /// Distance modulus `5 log₁₀[(1+z) c u / H0] + 25` with distances in Mpc.
    pub fn distance_modulus(&self, z: f64) -> Result<f64> {
        if !(z > 0.0) {
            return Err(domain(format!("distance modulus needs z > 0, got {z}")));
        }
        let dl = (1.0 + z) * SPEED_OF_LIGHT * self.u(z)? / self.theta.h0;
        Ok(5.0 * dl.log10() + 25.0)
    }

    pub fn chi2(&self, catalog: &SupernovaCatalog) -> Result<f64> {
        catalog.records.iter().try_fold(0.0, |acc, r| {
            let pull = (r.x - self.distance_modulus(r.z)?) / r.sigma;
            Ok(acc + pull * pull)
        })
    }
}

pub fn u_of_z(z: f64, theta: &CosmoParams) -> Result<f64> {
    DistanceModel::new(*theta)?.u(z)
}

pub fn distance_modulus(z: f64, theta: &CosmoParams) -> Result<f64> {
    DistanceModel::new(*theta)?.distance_modulus(z)
}

/// `Σ ((xᵢ − μ(zᵢ)) / σᵢ)²`.
pub fn chi2(catalog: &SupernovaCatalog, theta: &CosmoParams) -> Result<f64> {
    DistanceModel::new(*theta)?.chi2(catalog)
}

/// Test statistic `√(χ² / N)`.
pub fn lambda_cosmo(catalog: &SupernovaCatalog, theta: &CosmoParams) -> Result<f64> {
    Ok(lambda_from_chi2(chi2(catalog, theta)?, catalog.len()))
}

pub fn lambda_from_chi2(chi2: f64, count: usize) -> f64 {
    (chi2 / count as f64).sqrt()
}

/// Draws `xᵢ ~ Normal(μ(zᵢ, θ), σᵢ)` at the template's redshifts.
pub fn simulate_catalog<R: Rng + ?Sized>(
    theta: &CosmoParams,
    template: &SupernovaCatalog,
    rng: &mut R,
) -> Result<SupernovaCatalog> {
    let model = DistanceModel::new(*theta)?;
    let mut xs = Vec::with_capacity(template.len());
    for r in &template.records {
        let eps: f64 = rng.sample(StandardNormal);
        xs.push(model.distance_modulus(r.z)? + r.sigma * eps);
    }
    Ok(template.with_moduli(xs))
}

/// Dimensionless age `H0 t0` and the ratio `t_rip / t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeAndRip {
    pub h0_t0: f64,
    pub rip_over_age: f64,
}

pub fn age_and_rip(theta: &CosmoParams) -> Result<AgeAndRip> {
    let order = 1.5 / theta.n;
    let partial = lower_incomplete_gamma(order, 0.5)?;
    let h0_t0 = 0.5f64.exp() * 2f64.powf(order) * partial / theta.n;
    Ok(AgeAndRip {
        h0_t0,
        rip_over_age: gamma_fn(order)? / partial,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosmoFit {
    pub theta: CosmoParams,
    pub chi2_min: f64,
    /// Degrees of freedom: records minus the two fitted parameters.
    pub ndf: usize,
}

impl CosmoFit {
    pub fn chi2_per_ndf(&self) -> f64 {
        self.chi2_min / self.ndf as f64
    }
}

/// Minimizes χ² inside `bounds` with Nelder–Mead from ten random starts.
pub fn fit_chi2(
    catalog: &SupernovaCatalog,
    bounds: &UniformBoxPrior,
    seed: SeedSpec,
) -> Result<CosmoFit> {
    if bounds.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: bounds.dim(),
        });
    }
    let objective = |x: &[f64]| -> f64 {
        if !bounds.contains(x) {
            return f64::INFINITY;
        }
        CosmoParams::from_slice(x)
            .and_then(|t| chi2(catalog, &t))
            .unwrap_or(f64::INFINITY)
    };
    let step: Vec<f64> = bounds
        .lows()
        .iter()
        .zip(bounds.highs())
        .map(|(l, h)| 0.05 * (h - l))
        .collect();
    let opts = NelderMeadOptions {
        max_iter: 4000,
        f_tol: 1e-10,
        x_tol: 1e-9,
    };

    let mut best: Option<crate::optim::Minimum> = None;
    for k in 0..10 {
        let mut rng = derive_stream(seed, k);
        let start = bounds.sample(&mut rng);
        let mut m = nelder_mead(objective, &start, &step, opts);
        // a restart from the end point shakes off premature simplex collapse
        if m.fx.is_finite() {
            let small: Vec<f64> = step.iter().map(|s| s * 0.1).collect();
            m = nelder_mead(objective, &m.x, &small, opts);
        }
        if best.as_ref().is_none_or(|b| m.fx < b.fx) {
            best = Some(m);
        }
    }
    let best = best.expect("ten restarts");
    if !best.converged || !best.fx.is_finite() {
        return Err(Error::NonConvergence(format!(
            "chi2 minimization stopped after {} iterations at chi2={}",
            best.iterations, best.fx
        )));
    }
    Ok(CosmoFit {
        theta: CosmoParams::from_slice(&best.x)?,
        chi2_min: best.fx,
        ndf: catalog.len().saturating_sub(2).max(1),
    })
}

/// Simulation problem: catalogs resampled around a template, scored by
/// [`lambda_cosmo`]. Parameters are ordered `[n, H0]`.
#[derive(Debug, Clone)]
pub struct CosmoProblem {
    template: SupernovaCatalog,
    prior: UniformBoxPrior,
}

impl CosmoProblem {
    pub fn new(template: SupernovaCatalog, prior: UniformBoxPrior) -> Result<Self> {
        if prior.dim() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: prior.dim(),
            });
        }
        Ok(Self { template, prior })
    }

    /// Prior box `n ∈ [0.05, 0.65]`, `H0 ∈ [66, 76]`.
    pub fn default_prior() -> UniformBoxPrior {
        UniformBoxPrior::new(vec![0.05, 66.0], vec![0.65, 76.0]).expect("static bounds")
    }

    pub fn template(&self) -> &SupernovaCatalog {
        &self.template
    }
}

impl Problem for CosmoProblem {
    type Data = Vec<f64>;

    fn param_names(&self) -> Vec<String> {
        vec!["n".into(), "H0".into()]
    }

    fn prior(&self) -> &UniformBoxPrior {
        &self.prior
    }

    /// Only the simulated moduli are stored; redshifts and uncertainties
    /// come from the template.
    fn simulate(&self, theta: &[f64], rng: &mut Stream) -> Result<Vec<f64>> {
        let model = DistanceModel::new(CosmoParams::from_slice(theta)?)?;
        self.template
            .records
            .iter()
            .map(|r| {
                let eps: f64 = rng.sample(StandardNormal);
                Ok(model.distance_modulus(r.z)? + r.sigma * eps)
            })
            .collect()
    }

    fn statistic(&self, data: &Vec<f64>, theta: &[f64]) -> Result<f64> {
        Ok(self.statistics(&[data], theta)?[0])
    }

    fn statistics(&self, datasets: &[&Vec<f64>], theta: &[f64]) -> Result<Vec<f64>> {
        let model = DistanceModel::new(CosmoParams::from_slice(theta)?)?;
        let mu: Vec<f64> = self
            .template
            .records
            .iter()
            .map(|r| model.distance_modulus(r.z))
            .collect::<Result<_>>()?;
        datasets
            .iter()
            .map(|xs| {
                if xs.len() != mu.len() {
                    return Err(Error::Dimension {
                        expected: mu.len(),
                        got: xs.len(),
                    });
                }
                let c2: f64 = xs
                    .iter()
                    .zip(&mu)
                    .zip(&self.template.records)
                    .map(|((x, m), r)| ((x - m) / r.sigma).powi(2))
                    .sum();
                Ok(lambda_from_chi2(c2, mu.len()))
            })
            .collect()
    }
}
