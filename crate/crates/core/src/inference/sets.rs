use rayon::prelude::*;

use super::contour::{extract_contours, Polyline};
use super::estimator::CdfEstimator;
use crate::error::{invalid, Result};
use crate::params::{ParamPoint, UniformBoxPrior};
use crate::problem::Problem;

/// Nodes of a rectangular parameter lattice, one strictly increasing axis
/// per parameter. Nodes are enumerated row-major, last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    axes: Vec<Vec<f64>>,
}

impl GridSpec {
    pub const DEFAULT_NODES: usize = 200;

    pub fn from_axes(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(invalid("grid needs at least one axis"));
        }
        for a in &axes {
            if a.is_empty()
                || a.iter().any(|x| !x.is_finite())
                || a.windows(2).any(|w| w[0] >= w[1])
            {
                return Err(invalid("grid axes must be finite and strictly increasing"));
            }
        }
        Ok(Self { axes })
    }

    /// Evenly spaced nodes spanning `box_` edge to edge.
    pub fn over(box_: &UniformBoxPrior, nodes: &[usize]) -> Result<Self> {
        if nodes.len() != box_.dim() || nodes.iter().any(|&n| n < 2) {
            return Err(invalid("need at least two nodes along every parameter"));
        }
        let axes = (0..box_.dim())
            .map(|k| {
                let (lo, hi, n) = (box_.lows()[k], box_.highs()[k], nodes[k]);
                (0..n)
                    .map(|i| {
                        if i + 1 == n {
                            hi
                        } else {
                            lo + (hi - lo) * i as f64 / (n - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        Self::from_axes(axes)
    }

    /// The default 200 nodes per parameter.
    pub fn default_over(box_: &UniformBoxPrior) -> Result<Self> {
        Self::over(box_, &vec![Self::DEFAULT_NODES; box_.dim()])
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates of node `k`.
    pub fn node(&self, mut k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (axis, a) in self.axes.iter().enumerate().rev() {
            out[axis] = a[k % a.len()];
            k /= a.len();
        }
        out
    }

    /// All node coordinates, row-major.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).flat_map(|k| self.node(k)).collect()
    }
}

/// A Neyman confidence set evaluated on a grid at several levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet {
    pub names: Vec<String>,
    pub grid: GridSpec,
    /// `λ0 = λ(D, θ)` at each node.
    pub lambda_obs: Vec<f64>,
    /// Estimated `P(λ ≤ λ0 | θ)` at each node; `NaN` where invalid.
    pub phat: Vec<f64>,
    pub taus: Vec<f64>,
    /// Per level, node inclusion `phat ≤ τ`.
    pub masks: Vec<Vec<bool>>,
    /// Per level, iso-lines of `phat` at `τ`. Only filled for two parameters.
    pub boundaries: Vec<Vec<Polyline>>,
    /// Grid node with the smallest valid `phat`.
    pub best_fit: ParamPoint,
    /// Levels whose set contains no node.
    pub empty_levels: Vec<f64>,
    /// Nodes outside the estimator's domain.
    pub extrapolated_nodes: usize,
}

impl ConfidenceSet {
    pub fn included(&self, level: usize) -> usize {
        self.masks[level].iter().filter(|&&m| m).count()
    }
}

const EVAL_CHUNK: usize = 1024;

/// Builds the confidence sets for `observed` at each level in `taus`.
///
/// A node `θ` is kept at level `τ` iff `P̂(λ ≤ λ(D, θ) | θ) ≤ τ`, so the
/// masks are nested in `τ`. Nodes where the statistic fails get `NaN`.
pub fn confidence_set<P: Problem, E: CdfEstimator + ?Sized>(
    est: &E,
    problem: &P,
    observed: &P::Data,
    grid: &GridSpec,
    taus: &[f64],
) -> Result<ConfidenceSet> {
    let dim = grid.dim();
    if dim != est.dim() || dim != problem.prior().dim() {
        return Err(invalid("grid, estimator and problem dimensions differ"));
    }
    if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(invalid(format!("confidence level {t} is outside (0, 1)")));
    }
    let nodes = grid.nodes();
    let lambda_obs: Vec<f64> = nodes
        .par_chunks(dim)
        .map(|theta| problem.statistic(observed, theta).unwrap_or(f64::NAN))
        .collect();
    let phat: Vec<f64> = nodes
        .par_chunks(dim * EVAL_CHUNK)
        .zip(lambda_obs.par_chunks(EVAL_CHUNK))
        .map(|(thetas, lambdas)| {
            let mut out = est.cdf_batch(lambdas, thetas)?;
            for (v, l) in out.iter_mut().zip(lambdas) {
                if l.is_nan() {
                    *v = f64::NAN;
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .concat();

    let best = (0..phat.len())
        .filter(|&k| !phat[k].is_nan())
        .min_by(|&a, &b| phat[a].total_cmp(&phat[b]))
        .ok_or_else(|| invalid("the estimate is invalid at every grid node"))?;
    let best_fit = ParamPoint::new(grid.node(best), problem.param_names())?;

    let masks: Vec<Vec<bool>> = taus
        .iter()
        .map(|&t| phat.iter().map(|&p| p <= t).collect())
        .collect();
    let empty_levels = taus
        .iter()
        .zip(&masks)
        .filter(|(_, m)| !m.contains(&true))
        .map(|(t, _)| *t)
        .collect();
    let boundaries = if dim == 2 {
        let (xs, ys) = (&grid.axes()[0], &grid.axes()[1]);
        taus.iter()
            .map(|&t| extract_contours(&phat, xs, ys, t))
            .collect()
    } else {
        vec![Vec::new(); taus.len()]
    };
    let extrapolated_nodes = est.domain().map_or(0, |d| {
        nodes.chunks_exact(dim).filter(|t| !d.contains(t)).count()
    });

    Ok(ConfidenceSet {
        names: problem.param_names(),
        grid: grid.clone(),
        lambda_obs,
        phat,
        taus: taus.to_vec(),
        masks,
        boundaries,
        best_fit,
        empty_levels,
        extrapolated_nodes,
    })
}
