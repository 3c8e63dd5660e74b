//! Builds the configured problem and handles its dataset formats.

use std::path::PathBuf;

use alffi::cosmo::{CosmoProblem, SupernovaCatalog};
use alffi::onoff::{OnOffData, OnOffProblem};
use alffi::sir::{boarding_school, EpidemicConfig, EpidemicSeries, SirProblem};
use alffi::toy::GaussianToy;
use alffi::{Problem, UniformBoxPrior};
use anyhow::Result;

use crate::config::{config_err, ProblemKind, RunConfig};
use crate::io::{fmt_f64, parse_f64, read_catalog, read_series, read_table};

/// Where the observed dataset comes from.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ObservedArgs {
    /// Observed data file (On/Off `N,M`; epidemic `t,x`; catalog `z,x,sigma`; toy `x`).
    #[arg(long)]
    pub observed: Option<PathBuf>,
    /// On/Off signal-region count.
    #[arg(long = "N")]
    pub n: Option<u64>,
    /// On/Off control-region count.
    #[arg(long = "M")]
    pub m: Option<u64>,
    /// Toy observation.
    #[arg(long)]
    pub x: Option<f64>,
}

pub enum AnyProblem {
    Cosmo(CosmoProblem),
    OnOff(OnOffProblem),
    Sir(SirProblem),
    Toy(GaussianToy),
}

/// Runs `$body` with `$p` bound to the concrete problem.
macro_rules! with_problem {
    ($any:expr, $p:ident => $body:expr) => {
        match $any {
            $crate::problems::AnyProblem::Cosmo($p) => $body,
            $crate::problems::AnyProblem::OnOff($p) => $body,
            $crate::problems::AnyProblem::Sir($p) => $body,
            $crate::problems::AnyProblem::Toy($p) => $body,
        }
    };
}
pub(crate) use with_problem;

fn template(cfg: &RunConfig) -> Result<SupernovaCatalog> {
    let path = cfg
        .cosmo
        .catalog
        .as_ref()
        .ok_or_else(|| config_err("the cosmo problem needs `cosmo.catalog` (CSV z,x,sigma)"))?;
    read_catalog(path)
}

fn epidemic(cfg: &RunConfig) -> Result<(EpidemicConfig, EpidemicSeries)> {
    let (school_cfg, school) = boarding_school();
    let (times, counts) = match &cfg.sir.data {
        Some(p) => read_series(p)?,
        None => (school_cfg.obs_times.clone(), school.counts.clone()),
    };
    let s = &cfg.sir;
    let ecfg = EpidemicConfig::new(
        s.population.unwrap_or(school_cfg.population),
        s.s0.unwrap_or(school_cfg.s0),
        s.i0.unwrap_or(school_cfg.i0),
        s.r0.unwrap_or(school_cfg.r0),
        times,
    )?;
    Ok((ecfg, EpidemicSeries { counts }))
}

pub fn build(cfg: &RunConfig) -> Result<AnyProblem> {
    let prior = UniformBoxPrior::new(cfg.prior.lows.clone(), cfg.prior.highs.clone())?;
    Ok(match cfg.problem {
        ProblemKind::Cosmo => AnyProblem::Cosmo(CosmoProblem::new(template(cfg)?, prior)?),
        ProblemKind::Onoff => AnyProblem::OnOff(OnOffProblem::new(prior)?),
        ProblemKind::Sir => AnyProblem::Sir(SirProblem::new(epidemic(cfg)?.0, prior)?),
        ProblemKind::Toy => AnyProblem::Toy(GaussianToy::new(prior)?),
    })
}

/// Dataset I/O for each problem.
pub trait CliProblem: Problem {
    /// Header of the `simulate` output.
    fn dataset_header(&self) -> Vec<String>;

    /// Rows of the `simulate` output for dataset `index`.
    fn dataset_rows(&self, index: usize, theta: &[f64], data: &Self::Data) -> Vec<Vec<String>>;

    fn observed(&self, args: &ObservedArgs, cfg: &RunConfig) -> Result<Self::Data>;
}

fn theta_fields(theta: &[f64]) -> impl Iterator<Item = String> + '_ {
    theta.iter().map(|v| fmt_f64(*v))
}

impl CliProblem for OnOffProblem {
    fn dataset_header(&self) -> Vec<String> {
        ["mu", "nu", "N", "M"].map(String::from).to_vec()
    }

    fn dataset_rows(&self, _index: usize, theta: &[f64], d: &OnOffData) -> Vec<Vec<String>> {
        vec![theta_fields(theta)
            .chain([d.n.to_string(), d.m.to_string()])
            .collect()]
    }

    fn observed(&self, args: &ObservedArgs, _cfg: &RunConfig) -> Result<OnOffData> {
        if let (Some(n), Some(m)) = (args.n, args.m) {
            return Ok(OnOffData::new(n, m));
        }
        let path = args
            .observed
            .as_ref()
            .ok_or_else(|| config_err("On/Off needs --N and --M or --observed <file>"))?;
        let (header, rows) = read_table(path)?;
        if header != ["N", "M"] || rows.len() != 1 {
            return Err(config_err(format!(
                "{}: expected header N,M and one row",
                path.display()
            )));
        }
        let count = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| config_err(format!("bad count `{s}`")))
        };
        Ok(OnOffData::new(count(&rows[0][0])?, count(&rows[0][1])?))
    }
}

impl CliProblem for GaussianToy {
    fn dataset_header(&self) -> Vec<String> {
        ["theta", "x"].map(String::from).to_vec()
    }

    fn dataset_rows(&self, _index: usize, theta: &[f64], d: &f64) -> Vec<Vec<String>> {
        vec![theta_fields(theta).chain([fmt_f64(*d)]).collect()]
    }

    fn observed(&self, args: &ObservedArgs, _cfg: &RunConfig) -> Result<f64> {
        if let Some(x) = args.x {
            return Ok(x);
        }
        let path = args
            .observed
            .as_ref()
            .ok_or_else(|| config_err("the toy problem needs --x or --observed <file>"))?;
        let (header, rows) = read_table(path)?;
        if header != ["x"] || rows.len() != 1 {
            return Err(config_err(format!(
                "{}: expected header x and one row",
                path.display()
            )));
        }
        parse_f64(&rows[0][0])
    }
}

impl CliProblem for SirProblem {
    fn dataset_header(&self) -> Vec<String> {
        ["dataset", "alpha", "beta", "t", "x"]
            .map(String::from)
            .to_vec()
    }

    fn dataset_rows(&self, index: usize, theta: &[f64], d: &EpidemicSeries) -> Vec<Vec<String>> {
        self.config()
            .obs_times
            .iter()
            .zip(&d.counts)
            .map(|(t, x)| {
                std::iter::once(index.to_string())
                    .chain(theta_fields(theta))
                    .chain([fmt_f64(*t), x.to_string()])
                    .collect()
            })
            .collect()
    }

    fn observed(&self, args: &ObservedArgs, cfg: &RunConfig) -> Result<EpidemicSeries> {
        let (times, counts) = match &args.observed {
            Some(p) => read_series(p)?,
            None => {
                let (c, s) = epidemic(cfg)?;
                (c.obs_times, s.counts)
            }
        };
        if times != self.config().obs_times {
            return Err(config_err(
                "observed epidemic times differ from the configured observation times",
            ));
        }
        Ok(EpidemicSeries { counts })
    }
}

impl CliProblem for CosmoProblem {
    fn dataset_header(&self) -> Vec<String> {
        ["dataset", "n", "H0", "z", "x", "sigma"]
            .map(String::from)
            .to_vec()
    }

    fn dataset_rows(&self, index: usize, theta: &[f64], d: &Vec<f64>) -> Vec<Vec<String>> {
        self.template()
            .records()
            .iter()
            .zip(d)
            .map(|(r, x)| {
                std::iter::once(index.to_string())
                    .chain(theta_fields(theta))
                    .chain([fmt_f64(r.z), fmt_f64(*x), fmt_f64(r.sigma)])
                    .collect()
            })
            .collect()
    }

    fn observed(&self, args: &ObservedArgs, _cfg: &RunConfig) -> Result<Vec<f64>> {
        let catalog = match &args.observed {
            Some(p) => read_catalog(p)?,
            None => self.template().clone(),
        };
        let same_layout = catalog.len() == self.template().len()
            && catalog
                .records()
                .iter()
                .zip(self.template().records())
                .all(|(a, b)| a.z == b.z && a.sigma == b.sigma);
        if !same_layout {
            return Err(config_err(
                "observed catalog must share redshifts and uncertainties with the template",
            ));
        }
        Ok(catalog.records().iter().map(|r| r.x).collect())
    }
}
