//! The On/Off (signal plus background) counting experiment.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::params::UniformBoxPrior;
use crate::problem::Problem;
use crate::rng::Stream;
use crate::specfun::ln_gamma;

/// Observed counts: `n` in the signal region, `m` in the background-only region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OnOffData {
    pub n: u64,
    pub m: u64,
}

impl OnOffData {
    pub const fn new(n: u64, m: u64) -> Self {
        Self { n, m }
    }
}

/// Mean signal `mu` and mean background `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnOffParams {
    pub mu: f64,
    pub nu: f64,
}

impl OnOffParams {
    pub fn new(mu: f64, nu: f64) -> Result<Self> {
        if !(mu >= 0.0 && nu >= 0.0 && mu.is_finite() && nu.is_finite()) {
            return Err(domain(format!(
                "On/Off means must be finite and >= 0, got mu={mu}, nu={nu}"
            )));
        }
        Ok(Self { mu, nu })
    }

    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        match theta {
            [mu, nu] => Self::new(*mu, *nu),
            _ => Err(Error::Dimension {
                expected: 2,
                got: theta.len(),
            }),
        }
    }
}

/// `k log(rate)` with `0 log 0 = 0` and `−∞` for a positive count at zero rate.
fn count_log_rate(k: u64, rate: f64) -> f64 {
    if k == 0 {
        0.0
    } else if rate > 0.0 {
        k as f64 * rate.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Log likelihood without the factorial terms.
fn log_kernel(d: OnOffData, mu: f64, nu: f64) -> f64 {
    let s = mu + nu;
    count_log_rate(d.n, s) - s + count_log_rate(d.m, nu) - nu
}

/// Log of the product of Poisson(n | μ+ν) and Poisson(m | ν).
pub fn log_likelihood(d: OnOffData, p: OnOffParams) -> f64 {
    log_kernel(d, p.mu, p.nu) - ln_factorial(d.n) - ln_factorial(d.m)
}

fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        0.0
    } else {
        ln_gamma(k as f64 + 1.0).expect("positive argument")
    }
}

/// Signal estimate clipped at the physical boundary: `N − M` if `N > M`, else 0.
pub fn mu_hat(d: OnOffData) -> f64 {
    if d.n > d.m {
        (d.n - d.m) as f64
    } else {
        0.0
    }
}

/// Background estimate matching [`mu_hat`]: `M` above the boundary,
/// `(N + M) / 2` on it.
pub fn nu_hat(d: OnOffData) -> f64 {
    if d.n > d.m {
        d.m as f64
    } else {
        (d.n + d.m) as f64 / 2.0
    }
}

/// Likelihood-ratio statistic `−2 log[L(μ, ν) / L(μ̂, ν̂)]`.
///
/// Returns `+∞` when the hypothesis gives zero rate to a positive count.
///
/// ```
/// use alffi::onoff::{lambda_onoff, OnOffData, OnOffParams};
/// let d = OnOffData::new(3, 7);
/// let lam = lambda_onoff(d, OnOffParams::new(1.0, 5.0).unwrap());
/// assert!((lam - (2.0 - 6.0 * 1.2f64.ln())).abs() < 1e-12);
/// ```
pub fn lambda_onoff(d: OnOffData, p: OnOffParams) -> f64 {
    let at_theta = log_kernel(d, p.mu, p.nu);
    if at_theta == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    -2.0 * (at_theta - log_kernel(d, mu_hat(d), nu_hat(d)))
}

/// Draws a Poisson variate: sequential inversion below mean 30,
/// transformed rejection (PTRS) above.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < 30.0 {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= mean / k as f64;
            let next = cdf + p;
            if next == cdf {
                break;
            }
            cdf = next;
        }
        return k;
    }
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mean + k * loglam - ln_gamma(k + 1.0).expect("k >= 0");
        if lhs <= rhs {
            return k as u64;
        }
    }
}

pub fn simulate_onoff<R: Rng + ?Sized>(p: OnOffParams, rng: &mut R) -> OnOffData {
    let n = sample_poisson(p.mu + p.nu, rng);
    let m = sample_poisson(p.nu, rng);
    OnOffData { n, m }
}

/// The On/Off simulation problem with parameters ordered `[mu, nu]`.
#[derive(Debug, Clone)]
pub struct OnOffProblem {
    prior: UniformBoxPrior,
}

impl OnOffProblem {
    pub fn new(prior: UniformBoxPrior) -> Result<Self> {
        if prior.dim() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: prior.dim(),
            });
        }
        if prior.lows().iter().any(|&l| l < 0.0) {
            return Err(domain("On/Off prior must lie in the nonnegative quadrant"));
        }
        Ok(Self { prior })
    }

    /// `μ, ν ~ Unif(0, 20)`.
    pub fn default_prior() -> UniformBoxPrior {
        UniformBoxPrior::new(vec![0.0, 0.0], vec![20.0, 20.0]).expect("static bounds")
    }
}

impl Default for OnOffProblem {
    fn default() -> Self {
        Self {
            prior: Self::default_prior(),
        }
    }
}

impl Problem for OnOffProblem {
    type Data = OnOffData;

    fn param_names(&self) -> Vec<String> {
        vec!["mu".into(), "nu".into()]
    }

    fn prior(&self) -> &UniformBoxPrior {
        &self.prior
    }

    fn simulate(&self, theta: &[f64], rng: &mut Stream) -> Result<OnOffData> {
        Ok(simulate_onoff(OnOffParams::from_slice(theta)?, rng))
    }

    fn statistic(&self, data: &OnOffData, theta: &[f64]) -> Result<f64> {
        Ok(lambda_onoff(*data, OnOffParams::from_slice(theta)?))
    }
}
