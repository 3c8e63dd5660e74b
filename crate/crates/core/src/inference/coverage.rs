use rayon::prelude::*;

use super::estimator::CdfEstimator;
use crate::error::{invalid, Result};
use crate::problem::Problem;
use crate::rng::{derive_stream, SeedSpec};

/// Monte Carlo coverage of one parameter point at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub theta: Vec<f64>,
    pub tau: f64,
    /// Fraction of simulated datasets whose set contains `theta`.
    pub p: f64,
    pub stderr: f64,
    /// Datasets that entered the count.
    pub trials: usize,
}

impl CoverageRow {
    fn new(theta: &[f64], tau: f64, hits: usize, trials: usize) -> Self {
        let p = if trials == 0 {
            f64::NAN
        } else {
            hits as f64 / trials as f64
        };
        Self {
            theta: theta.to_vec(),
            tau,
            p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }

    /// `|p − τ|` in units of the standard error.
    pub fn pull(&self) -> f64 {
        (self.p - self.tau).abs() / self.stderr
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub names: Vec<String>,
    pub rows: Vec<CoverageRow>,
    /// Simulated datasets dropped because simulation or the statistic failed.
    pub failures: usize,
}

/// Simulates `trials` datasets at `theta` and counts, for each level, how
/// often `P̂(λ ≤ λ(D, θ) | θ) ≤ τ`, i.e. how often the set built from `D`
/// contains `theta`.
pub fn coverage<P: Problem, E: CdfEstimator + ?Sized>(
    est: &E,
    problem: &P,
    theta: &[f64],
    taus: &[f64],
    trials: usize,
    seed: SeedSpec,
) -> Result<CoverageReport> {
    if trials < 100 {
        return Err(invalid("coverage needs at least 100 trials"));
    }
    if theta.len() != est.dim() || theta.len() != problem.prior().dim() {
        return Err(invalid("parameter dimension does not match the problem"));
    }
    let lambdas: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .filter_map(|t| {
            let mut rng = derive_stream(seed, t);
            let data = problem.simulate(theta, &mut rng).ok()?;
            problem.statistic(&data, theta).ok().filter(|l| !l.is_nan())
        })
        .collect();
    let thetas: Vec<f64> = lambdas.iter().flat_map(|_| theta.iter().copied()).collect();
    let phat = est.cdf_batch(&lambdas, &thetas)?;
    let rows = taus
        .iter()
        .map(|&tau| {
            CoverageRow::new(
                theta,
                tau,
                phat.iter().filter(|&&p| p <= tau).count(),
                lambdas.len(),
            )
        })
        .collect();
    Ok(CoverageReport {
        names: problem.param_names(),
        rows,
        failures: trials - lambdas.len(),
    })
}

/// [`coverage`] at several points; point `k` uses `seed.child(k)`.
pub fn coverage_many<P: Problem, E: CdfEstimator + ?Sized>(
    est: &E,
    problem: &P,
    thetas: &[Vec<f64>],
    taus: &[f64],
    trials: usize,
    seed: SeedSpec,
) -> Result<CoverageReport> {
    let mut report = CoverageReport {
        names: problem.param_names(),
        rows: Vec::new(),
        failures: 0,
    };
    for (k, theta) in thetas.iter().enumerate() {
        let r = coverage(est, problem, theta, taus, trials, seed.child(k as u64))?;
        report.rows.extend(r.rows);
        report.failures += r.failures;
    }
    Ok(report)
}
