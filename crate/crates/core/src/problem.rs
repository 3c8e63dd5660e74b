//! The simulator/statistic contract shared by every model.

use crate::error::Result;
use crate::params::UniformBoxPrior;
use crate::rng::Stream;

/// A parameterized simulator paired with a test statistic.
///
/// Parameters are passed as plain slices in natural units, ordered as
/// [`Problem::param_names`]. Large statistic values disfavor `theta`.
pub trait Problem: Sync {
    type Data: Clone + Send + Sync;

    fn param_names(&self) -> Vec<String>;

    fn prior(&self) -> &UniformBoxPrior;

    fn simulate(&self, theta: &[f64], rng: &mut Stream) -> Result<Self::Data>;

    fn statistic(&self, data: &Self::Data, theta: &[f64]) -> Result<f64>;

    /// Evaluates the statistic for several datasets at one parameter point.
    ///
    /// Models with expensive per-`theta` setup (an ODE solve, a distance
    /// table) override this to share it.
    fn statistics(&self, datasets: &[&Self::Data], theta: &[f64]) -> Result<Vec<f64>> {
        datasets.iter().map(|d| self.statistic(d, theta)).collect()
    }
}
