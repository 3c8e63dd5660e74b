use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::nn::Dataset;
use crate::problem::Problem;
use crate::rng::{derive_stream, SeedSpec};

/// One regression example: `z = 1(λ ≤ λ0)` with `λ0` the statistic of an
/// independent "observed" dataset at the same `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTriple {
    pub z: u8,
    pub lambda_obs: f64,
    pub theta: Vec<f64>,
}

/// How the "observed" dataset of each triple is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShuffleMode {
    /// Reuse the simulated datasets under one uniform random permutation.
    #[default]
    Permute,
    /// Simulate a second dataset at each `theta`.
    Fresh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub names: Vec<String>,
    pub triples: Vec<TrainingTriple>,
    /// For each triple, the index of the simulated dataset that served as
    /// its observed data (`None` in fresh mode).
    pub observed_source: Vec<Option<usize>>,
    /// Rows dropped because simulation or the statistic failed.
    pub skipped: usize,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn mean_z(&self) -> f64 {
        self.triples.iter().map(|t| t.z as f64).sum::<f64>() / self.triples.len().max(1) as f64
    }
}

/// A row's parameters, its dataset and, in fresh mode, its observed dataset.
type Simulated<D> = (Vec<f64>, Option<D>, Option<D>);

/// Builds `count` training triples.
///
/// Row `i` draws `θᵢ` from the prior and simulates `𝒟ᵢ` on stream `i`.
/// In [`ShuffleMode::Permute`] the observed dataset of row `i` is
/// `𝒟_π(i)` for one uniform permutation `π`, which decorrelates it from
/// `θᵢ` while keeping its marginal distribution. Ties count as `z = 1`.
pub fn make_training_set<P: Problem>(
    problem: &P,
    count: usize,
    seed: SeedSpec,
    mode: ShuffleMode,
) -> Result<TrainingSet> {
    if count < 2 {
        return Err(invalid("a training set needs at least two rows"));
    }
    let prior = problem.prior();
    let sim_seed = seed.child(0);
    let simulated: Vec<Simulated<P::Data>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_stream(sim_seed, i);
            let theta = prior.sample(&mut rng);
            let data = problem.simulate(&theta, &mut rng).ok();
            let fresh = match (mode, &data) {
                (ShuffleMode::Fresh, Some(_)) => problem.simulate(&theta, &mut rng).ok(),
                _ => None,
            };
            (theta, data, fresh)
        })
        .collect();

    let ok: Vec<usize> = (0..count).filter(|&i| simulated[i].1.is_some()).collect();
    let mut perm = ok.clone();
    perm.shuffle(&mut derive_stream(seed.child(1), 0));

    let rows: Vec<Option<(TrainingTriple, Option<usize>)>> = ok
        .par_iter()
        .zip(perm.par_iter())
        .map(|(&i, &j)| {
            let (theta, data, fresh) = &simulated[i];
            let data = data.as_ref()?;
            let (observed, source) = match mode {
                ShuffleMode::Permute => (simulated[j].1.as_ref()?, Some(j)),
                ShuffleMode::Fresh => (fresh.as_ref()?, None),
            };
            let stats = problem.statistics(&[data, observed], theta).ok()?;
            let (lambda, lambda_obs) = (stats[0], stats[1]);
            if lambda.is_nan() || lambda_obs.is_nan() {
                return None;
            }
            let z = u8::from(lambda <= lambda_obs);
            Some((
                TrainingTriple {
                    z,
                    lambda_obs,
                    theta: theta.clone(),
                },
                source,
            ))
        })
        .collect();

    let mut triples = Vec::with_capacity(rows.len());
    let mut observed_source = Vec::with_capacity(rows.len());
    for (t, s) in rows.into_iter().flatten() {
        triples.push(t);
        observed_source.push(s);
    }
    let skipped = count - triples.len();
    Ok(TrainingSet {
        names: problem.param_names(),
        triples,
        observed_source,
        skipped,
    })
}

/// Triples for a fixed observed dataset: `λ0 = λ(D, θᵢ)` at every row.
/// These feed the histogram estimator.
pub fn make_observed_triples<P: Problem>(
    problem: &P,
    observed: &P::Data,
    count: usize,
    seed: SeedSpec,
) -> Result<TrainingSet> {
    if count < 2 {
        return Err(invalid("a training set needs at least two rows"));
    }
    let prior = problem.prior();
    let rows: Vec<Option<TrainingTriple>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_stream(seed, i);
            let theta = prior.sample(&mut rng);
            let data = problem.simulate(&theta, &mut rng).ok()?;
            let stats = problem.statistics(&[&data, observed], &theta).ok()?;
            if stats.iter().any(|s| s.is_nan()) {
                return None;
            }
            Some(TrainingTriple {
                z: u8::from(stats[0] <= stats[1]),
                lambda_obs: stats[1],
                theta,
            })
        })
        .collect();
    let triples: Vec<TrainingTriple> = rows.into_iter().flatten().collect();
    let skipped = count - triples.len();
    let observed_source = vec![None; triples.len()];
    Ok(TrainingSet {
        names: problem.param_names(),
        triples,
        observed_source,
        skipped,
    })
}

/// Network inputs `[λ0, θ...]` and targets `z`.
pub fn training_dataset(triples: &[TrainingTriple]) -> Result<Dataset> {
    let dim = 1 + triples.first().map_or(0, |t| t.theta.len());
    let mut features = Vec::with_capacity(triples.len() * dim);
    let mut targets = Vec::with_capacity(triples.len());
    for t in triples {
        if t.theta.len() + 1 != dim {
            return Err(invalid("triples have inconsistent parameter dimensions"));
        }
        features.push(t.lambda_obs);
        features.extend_from_slice(&t.theta);
        targets.push(t.z as f64);
    }
    Dataset::new(dim, features, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::onoff::OnOffProblem;
    use crate::params::UniformBoxPrior;
    use crate::rng::Stream;

    /// Statistic that ignores its inputs.
    struct Flat;

    impl Problem for Flat {
        type Data = u32;
        fn param_names(&self) -> Vec<String> {
            vec!["a".into()]
        }
        fn prior(&self) -> &UniformBoxPrior {
            static PRIOR: std::sync::OnceLock<UniformBoxPrior> = std::sync::OnceLock::new();
            PRIOR.get_or_init(|| UniformBoxPrior::new(vec![0.0], vec![1.0]).unwrap())
        }
        fn simulate(&self, _theta: &[f64], _rng: &mut Stream) -> Result<u32> {
            Ok(1)
        }
        fn statistic(&self, _data: &u32, _theta: &[f64]) -> Result<f64> {
            Ok(3.5)
        }
    }

    #[test]
    fn constant_statistic_gives_all_ones() {
        let set = make_training_set(&Flat, 500, SeedSpec::new(1), ShuffleMode::Permute).unwrap();
        assert!(set.triples.iter().all(|t| t.z == 1));
        assert_eq!(set.skipped, 0);
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let set = make_training_set(
            &OnOffProblem::default(),
            2000,
            SeedSpec::new(2),
            ShuffleMode::Permute,
        )
        .unwrap();
        let mut sources: Vec<usize> = set.observed_source.iter().map(|s| s.unwrap()).collect();
        sources.sort_unstable();
        assert_eq!(sources, (0..2000).collect::<Vec<_>>());
    }

    #[test]
    fn output_is_seed_deterministic() {
        let p = OnOffProblem::default();
        let a = make_training_set(&p, 300, SeedSpec::new(3), ShuffleMode::Permute).unwrap();
        let b = make_training_set(&p, 300, SeedSpec::new(3), ShuffleMode::Permute).unwrap();
        let c = make_training_set(&p, 300, SeedSpec::new(4), ShuffleMode::Permute).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let f = make_training_set(&p, 300, SeedSpec::new(3), ShuffleMode::Fresh).unwrap();
        assert_eq!(f.len(), 300);
        assert!(f.observed_source.iter().all(Option::is_none));
    }

    #[test]
    fn too_small() {
        assert!(make_training_set(&Flat, 1, SeedSpec::new(1), ShuffleMode::Permute).is_err());
    }

    #[test]
    fn dataset_layout() {
        let triples = vec![
            TrainingTriple {
                z: 1,
                lambda_obs: 0.5,
                theta: vec![1.0, 2.0],
            },
            TrainingTriple {
                z: 0,
                lambda_obs: 0.7,
                theta: vec![3.0, 4.0],
            },
        ];
        let d = training_dataset(&triples).unwrap();
        assert_eq!(d.row(1), &[0.7, 3.0, 4.0]);
        assert_eq!(d.targets(), &[1.0, 0.0]);
    }
}
