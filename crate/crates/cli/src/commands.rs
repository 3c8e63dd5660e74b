use std::path::{Path, PathBuf};

use alffi::cosmo::{age_and_rip, fit_chi2, DistanceModel};
use alffi::inference::{
    confidence_set, coverage_many, make_observed_triples, make_training_set, training_dataset,
    CdfEstimate, CdfEstimator, GridSpec, HistogramCdf, NetworkCdf,
};
use alffi::nn::{train, FeatureMap, FeatureTransform, MlpSpec};
use alffi::{derive_stream, Problem};
use anyhow::Result;
use rayon::prelude::*;

use crate::config::{config_err, ProblemKind, RunConfig};
use crate::io;
use crate::problems::{build, with_problem, CliProblem, ObservedArgs};

/// Reads an estimator: a JSON artifact path, `constant:<value>`, or
/// `gaussian-exact`.
pub fn load_estimator(spec: &str, dim: usize) -> Result<CdfEstimate> {
    let est = if let Some(v) = spec.strip_prefix("constant:") {
        let value = io::parse_f64(v)?;
        if !(0.0..=1.0).contains(&value) {
            return Err(config_err("a constant estimate must lie in [0, 1]"));
        }
        CdfEstimate::Constant { dim, value }
    } else if spec == "gaussian-exact" {
        CdfEstimate::GaussianExact
    } else {
        let text = std::fs::read_to_string(spec)
            .map_err(|e| config_err(format!("cannot read estimator {spec}: {e}")))?;
        CdfEstimate::from_json(&text).map_err(|e| config_err(format!("{spec}: {e}")))?
    };
    if est.dim() != dim {
        return Err(config_err(format!(
            "estimator has {} parameters, the problem has {dim}",
            est.dim()
        )));
    }
    Ok(est)
}

pub fn simulate(cfg: &RunConfig, count: usize, out: Option<PathBuf>) -> Result<()> {
    let out = out.unwrap_or_else(|| cfg.out("simulated.csv"));
    with_problem!(&build(cfg)?, p => simulate_with(p, cfg, count, &out))?;
    println!("wrote {count} datasets to {}", out.display());
    Ok(())
}

fn simulate_with<P: CliProblem>(p: &P, cfg: &RunConfig, count: usize, out: &Path) -> Result<()> {
    let seed = cfg.seed_spec().child(10);
    let rows: Vec<Vec<Vec<String>>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_stream(seed, i as u64);
            let theta = p.prior().sample(&mut rng);
            let data = p.simulate(&theta, &mut rng)?;
            Ok(p.dataset_rows(i, &theta, &data))
        })
        .collect::<Result<_>>()?;
    io::write_table(out, &p.dataset_header(), rows.into_iter().flatten())
}

pub fn make_train(cfg: &RunConfig, count: Option<usize>, out: Option<PathBuf>) -> Result<()> {
    let count = count.unwrap_or(cfg.training.count);
    let out = out.unwrap_or_else(|| cfg.out("train.csv"));
    let set = with_problem!(&build(cfg)?, p => make_training_set(p, count, cfg.seed_spec().child(1), cfg.training.shuffle))?;
    io::write_triples(&out, &set.names, &set.triples)?;
    println!(
        "wrote {} triples to {} (skipped {}, mean z {:.4})",
        set.len(),
        out.display(),
        set.skipped,
        set.mean_z()
    );
    Ok(())
}

fn feature_map(cfg: &RunConfig) -> Result<FeatureMap> {
    let n = &cfg.network;
    let (lows, highs) = (&cfg.prior.lows, &cfg.prior.highs);
    let center: Vec<f64> = lows.iter().zip(highs).map(|(l, h)| 0.5 * (l + h)).collect();
    let half: Vec<f64> = lows.iter().zip(highs).map(|(l, h)| 0.5 * (h - l)).collect();
    let theta_shift = if n.theta_shift.is_empty() {
        center
    } else {
        n.theta_shift.clone()
    };
    let theta_scale = if n.theta_scale.is_empty() {
        half
    } else {
        n.theta_scale.clone()
    };
    let shift = std::iter::once(n.lambda_shift).chain(theta_shift).collect();
    let scale = std::iter::once(n.lambda_scale).chain(theta_scale).collect();
    let transforms = std::iter::once(n.lambda_transform)
        .chain(std::iter::repeat_n(FeatureTransform::Identity, cfg.dim()))
        .collect();
    Ok(FeatureMap::new(shift, scale)?.with_transforms(transforms)?)
}

pub fn train_cmd(cfg: &RunConfig, triples: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let problem = build(cfg)?;
    let names = with_problem!(&problem, p => p.param_names());
    let path = triples.unwrap_or_else(|| cfg.out("train.csv"));
    let triples = io::read_triples(&path, &names)?;
    let data = training_dataset(&triples)?;
    let mut sizes = vec![cfg.dim() + 1];
    sizes.extend(&cfg.network.hidden);
    sizes.push(1);
    let spec = MlpSpec::new(sizes, cfg.network.activation, cfg.network.batch_norm)?;
    let outcome = train(spec, feature_map(cfg)?, &data, &cfg.train_config())?;

    let domain = alffi::UniformBoxPrior::new(cfg.prior.lows.clone(), cfg.prior.highs.clone())?;
    let est = CdfEstimate::Network(NetworkCdf::new(names, domain, outcome.model)?);
    let out = out.unwrap_or_else(|| cfg.out("model.json"));
    io::write_json(&out, &est.to_json()?)?;
    io::write_train_log(&cfg.out("train_log.csv"), &outcome.log)?;
    println!(
        "best validation loss {} at iteration {}; model written to {}",
        outcome.best_val_loss,
        outcome.best_iteration,
        out.display()
    );
    Ok(())
}

pub fn histogram(
    cfg: &RunConfig,
    observed: &ObservedArgs,
    count: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    let count = count.unwrap_or(cfg.histogram.count);
    let problem = build(cfg)?;
    let set = with_problem!(&problem, p => {
        let d = p.observed(observed, cfg)?;
        make_observed_triples(p, &d, count, cfg.seed_spec().child(2))
    })?;
    let domain = alffi::UniformBoxPrior::new(cfg.prior.lows.clone(), cfg.prior.highs.clone())?;
    let hist = HistogramCdf::from_triples(&set.triples, domain, cfg.histogram.bins.clone())?;
    let empty = hist.h1().iter().filter(|&&c| c == 0.0).count();
    let out = out.unwrap_or_else(|| cfg.out("histogram.json"));
    io::write_json(&out, &CdfEstimate::Histogram(hist).to_json()?)?;
    println!(
        "histogram from {} triples written to {} ({empty} empty bins)",
        set.len(),
        out.display()
    );
    Ok(())
}

pub fn sets(cfg: &RunConfig, estimator: Option<String>, observed: &ObservedArgs) -> Result<()> {
    let est = load_estimator(
        &estimator.unwrap_or_else(|| cfg.out("model.json").display().to_string()),
        cfg.dim(),
    )?;
    let grid = match &est {
        CdfEstimate::Histogram(h) => {
            GridSpec::from_axes((0..h.dim()).map(|k| h.centers(k)).collect())?
        }
        _ => {
            let prior =
                alffi::UniformBoxPrior::new(cfg.prior.lows.clone(), cfg.prior.highs.clone())?;
            GridSpec::over(&prior, &cfg.grid.nodes)?
        }
    };
    let set = with_problem!(&build(cfg)?, p => {
        let d = p.observed(observed, cfg)?;
        confidence_set(&est, p, &d, &grid, &cfg.taus)
    })?;
    io::write_sets(
        &cfg.out("sets_grid.csv"),
        &cfg.out("sets_boundary.csv"),
        &set,
    )?;
    let best: Vec<String> = set
        .names
        .iter()
        .zip(set.best_fit.values())
        .map(|(n, v)| format!("{n}={v}"))
        .collect();
    println!("best fit: {}", best.join(", "));
    for (k, tau) in set.taus.iter().enumerate() {
        println!(
            "tau {tau}: {} of {} nodes, {} boundary segments",
            set.included(k),
            set.grid.len(),
            set.boundaries[k].len()
        );
    }
    for tau in &set.empty_levels {
        eprintln!("warning: the confidence set at tau={tau} is empty");
    }
    if set.extrapolated_nodes > 0 {
        eprintln!(
            "warning: {} grid nodes lie outside the estimator's training domain",
            set.extrapolated_nodes
        );
    }
    Ok(())
}

/// Centers of a `k × k` partition of the prior box (k points on one axis
/// for the toy problem).
pub fn lattice_points(cfg: &RunConfig, k: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = cfg
        .prior
        .lows
        .iter()
        .zip(&cfg.prior.highs)
        .map(|(l, h)| {
            (0..k)
                .map(|i| l + (h - l) * (i as f64 + 0.5) / k as f64)
                .collect()
        })
        .collect();
    let mut points = vec![Vec::new()];
    for axis in &axes {
        points = points
            .iter()
            .flat_map(|p| axis.iter().map(move |v| [p.clone(), vec![*v]].concat()))
            .collect();
    }
    points
}

pub fn coverage(
    cfg: &RunConfig,
    estimator: Option<String>,
    thetas: Option<PathBuf>,
    points: Option<usize>,
    trials: Option<usize>,
) -> Result<()> {
    let est = load_estimator(
        &estimator.unwrap_or_else(|| cfg.out("model.json").display().to_string()),
        cfg.dim(),
    )?;
    let trials = trials.unwrap_or(cfg.coverage.trials);
    if trials < 100 {
        return Err(config_err("coverage needs at least 100 trials"));
    }
    let problem = build(cfg)?;
    let names = with_problem!(&problem, p => p.param_names());
    let points = match (thetas, points) {
        (Some(path), _) => io::read_points(&path, &names)?,
        (None, Some(k)) => lattice_points(cfg, k),
        (None, None) => return Err(config_err("coverage needs --thetas <file> or --points <k>")),
    };
    let prior = alffi::UniformBoxPrior::new(cfg.prior.lows.clone(), cfg.prior.highs.clone())?;
    if let Some(p) = points
        .iter()
        .find(|p| p.len() != cfg.dim() || !prior.contains(p))
    {
        return Err(config_err(format!(
            "coverage point {p:?} is outside the prior box"
        )));
    }
    let report = with_problem!(&problem, p => coverage_many(&est, p, &points, &cfg.taus, trials, cfg.seed_spec().child(4)))?;
    io::write_coverage(&cfg.out("coverage.csv"), &report)?;
    let worst = report
        .rows
        .iter()
        .map(|r| (r.p - r.tau).abs())
        .fold(0.0, f64::max);
    println!(
        "coverage at {} points, T={trials}: max |p - tau| = {worst:.4}; {} failed simulations",
        points.len(),
        report.failures
    );
    Ok(())
}

pub fn fit(cfg: &RunConfig, observed: &ObservedArgs) -> Result<()> {
    if cfg.problem != ProblemKind::Cosmo {
        return Err(config_err(
            "fit applies to the cosmo problem; use `sets` for a best-fit point elsewhere",
        ));
    }
    let catalog = match &observed.observed {
        Some(p) => io::read_catalog(p)?,
        None => io::read_catalog(
            cfg.cosmo
                .catalog
                .as_ref()
                .ok_or_else(|| config_err("no catalog given"))?,
        )?,
    };
    let prior = alffi::UniformBoxPrior::new(cfg.prior.lows.clone(), cfg.prior.highs.clone())?;
    let fit = fit_chi2(&catalog, &prior, cfg.seed_spec().child(5))?;
    let ages = age_and_rip(&fit.theta)?;
    println!("n = {}", fit.theta.n);
    println!("H0 = {}", fit.theta.h0);
    println!("chi2 = {}", fit.chi2_min);
    println!("ndf = {}", fit.ndf);
    println!("chi2/ndf = {}", fit.chi2_per_ndf());
    println!("H0*t0 = {}", ages.h0_t0);
    println!("t_rip/t0 = {}", ages.rip_over_age);

    let model = DistanceModel::new(fit.theta)?;
    let z_max = catalog.records().iter().map(|r| r.z).fold(0.0, f64::max);
    let rows = (1..=200)
        .map(|i| {
            let z = z_max * i as f64 / 200.0;
            Ok(vec![
                io::fmt_f64(z),
                io::fmt_f64(model.distance_modulus(z)?),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    io::write_table(&cfg.out("fit_curve.csv"), &["z".into(), "mu".into()], rows)?;
    Ok(())
}
