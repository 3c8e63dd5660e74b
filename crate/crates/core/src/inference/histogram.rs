use serde::{Deserialize, Serialize};

use super::triples::TrainingTriple;
use crate::error::{invalid, Result};
use crate::params::UniformBoxPrior;

/// The ratio `H_Z / H_1` of two parameter-space histograms built from
/// triples that share one observed dataset.
///
/// Bins are indexed row-major with the last parameter varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramCdf {
    domain: UniformBoxPrior,
    bins: Vec<usize>,
    /// Sum of `z` per bin.
    hz: Vec<f64>,
    /// Triple count per bin.
    h1: Vec<f64>,
}

impl HistogramCdf {
    /// Bins `triples` on a regular grid over `domain`. Triples outside the
    /// box are ignored.
    pub fn from_triples(
        triples: &[TrainingTriple],
        domain: UniformBoxPrior,
        bins: Vec<usize>,
    ) -> Result<Self> {
        if bins.len() != domain.dim() {
            return Err(invalid("need one bin count per parameter"));
        }
        if bins.iter().any(|&b| b < 1) {
            return Err(invalid("bin counts must be positive"));
        }
        let total: usize = bins.iter().product();
        let mut h = Self {
            domain,
            bins,
            hz: vec![0.0; total],
            h1: vec![0.0; total],
        };
        for t in triples {
            if t.theta.len() != h.dim() {
                return Err(invalid("triple dimension does not match the histogram"));
            }
            if let Some(k) = h.bin_index(&t.theta) {
                h.h1[k] += 1.0;
                h.hz[k] += t.z as f64;
            }
        }
        if h.h1.iter().all(|&c| c == 0.0) {
            return Err(invalid("every histogram bin is empty"));
        }
        Ok(h)
    }

    /// Rebuilds a histogram from its stored grids.
    pub fn from_parts(
        domain: UniformBoxPrior,
        bins: Vec<usize>,
        hz: Vec<f64>,
        h1: Vec<f64>,
    ) -> Result<Self> {
        let total: usize = bins.iter().product();
        if bins.len() != domain.dim() || hz.len() != total || h1.len() != total {
            return Err(invalid("histogram grids do not match the bin layout"));
        }
        if hz.iter().zip(&h1).any(|(z, n)| !(*z >= 0.0 && z <= n)) {
            return Err(invalid("histogram needs 0 ≤ H_Z ≤ H_1 in every bin"));
        }
        Ok(Self {
            domain,
            bins,
            hz,
            h1,
        })
    }

    pub fn dim(&self) -> usize {
        self.bins.len()
    }

    pub fn domain(&self) -> &UniformBoxPrior {
        &self.domain
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn hz(&self) -> &[f64] {
        &self.hz
    }

    pub fn h1(&self) -> &[f64] {
        &self.h1
    }

    /// Bin edges along parameter `axis`.
    pub fn edges(&self, axis: usize) -> Vec<f64> {
        let (lo, hi, n) = (
            self.domain.lows()[axis],
            self.domain.highs()[axis],
            self.bins[axis],
        );
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .collect()
    }

    /// Bin centers along parameter `axis`.
    pub fn centers(&self, axis: usize) -> Vec<f64> {
        let e = self.edges(axis);
        e.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Flat index of the bin holding `theta`. The upper box edge belongs
    /// to the last bin.
    pub fn bin_index(&self, theta: &[f64]) -> Option<usize> {
        let mut k = 0;
        for (axis, &x) in theta.iter().enumerate() {
            let (lo, hi, n) = (
                self.domain.lows()[axis],
                self.domain.highs()[axis],
                self.bins[axis],
            );
            if !(x >= lo && x <= hi) {
                return None;
            }
            let i = (((x - lo) / (hi - lo)) * n as f64) as usize;
            k = k * n + i.min(n - 1);
        }
        Some(k)
    }

    /// `H_Z / H_1` in the bin holding `theta`; `NaN` for an empty bin or a
    /// point outside the box.
    pub fn value(&self, theta: &[f64]) -> f64 {
        match self.bin_index(theta) {
            Some(k) if self.h1[k] > 0.0 => self.hz[k] / self.h1[k],
            _ => f64::NAN,
        }
    }

    /// Per-bin ratios in flat order, `NaN` where empty.
    pub fn values(&self) -> Vec<f64> {
        self.hz
            .iter()
            .zip(&self.h1)
            .map(|(z, n)| if *n > 0.0 { z / n } else { f64::NAN })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> UniformBoxPrior {
        UniformBoxPrior::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()
    }

    fn t(z: u8, a: f64, b: f64) -> TrainingTriple {
        TrainingTriple {
            z,
            lambda_obs: 0.0,
            theta: vec![a, b],
        }
    }

    #[test]
    fn one_bin_is_the_fraction() {
        let triples: Vec<_> = (0..10).map(|i| t(u8::from(i < 3), 0.5, 0.5)).collect();
        let h = HistogramCdf::from_triples(&triples, unit_square(), vec![1, 1]).unwrap();
        assert_eq!(h.value(&[0.2, 0.9]), 0.3);
    }

    #[test]
    fn all_ones_and_empty_bins() {
        let triples = vec![t(1, 0.1, 0.1), t(1, 0.9, 0.9), t(1, 1.0, 1.0)];
        let h = HistogramCdf::from_triples(&triples, unit_square(), vec![2, 2]).unwrap();
        assert_eq!(h.value(&[0.2, 0.2]), 1.0);
        assert_eq!(h.value(&[0.7, 0.7]), 1.0);
        assert_eq!(h.h1()[3], 2.0);
        assert!(h.value(&[0.2, 0.7]).is_nan());
        assert!(h.value(&[1.5, 0.7]).is_nan());
        assert_eq!(h.values().iter().filter(|v| v.is_nan()).count(), 2);
    }

    #[test]
    fn row_major_layout() {
        let h = HistogramCdf::from_triples(&[t(0, 0.1, 0.6)], unit_square(), vec![2, 2]).unwrap();
        assert_eq!(h.bin_index(&[0.1, 0.6]), Some(1));
        assert_eq!(h.bin_index(&[0.6, 0.1]), Some(2));
        assert_eq!(h.centers(0), vec![0.25, 0.75]);
    }

    #[test]
    fn all_empty_is_an_error() {
        assert!(HistogramCdf::from_triples(&[t(1, 2.0, 2.0)], unit_square(), vec![3, 3]).is_err());
        assert!(HistogramCdf::from_triples(&[], unit_square(), vec![3]).is_err());
    }

    #[test]
    fn parts_round_trip() {
        let h = HistogramCdf::from_triples(
            &[t(1, 0.1, 0.1), t(0, 0.1, 0.2)],
            unit_square(),
            vec![2, 2],
        )
        .unwrap();
        let back = HistogramCdf::from_parts(
            h.domain().clone(),
            h.bins().to_vec(),
            h.hz().to_vec(),
            h.h1().to_vec(),
        )
        .unwrap();
        assert_eq!(back, h);
        assert!(HistogramCdf::from_parts(
            h.domain().clone(),
            vec![2, 2],
            vec![2.0; 4],
            vec![1.0; 4]
        )
        .is_err());
    }
}
