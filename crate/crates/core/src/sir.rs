//! SIR epidemic: mean-field ODE, exact continuous-time Markov chain
//! simulator and the weighted least-squares test statistic.
//!
//! Incidence is the mass-action term `β S I` on counts, so `β` is a
//! per-person rate and the outbreak threshold is `β s0 / α`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::params::UniformBoxPrior;
use crate::problem::Problem;
use crate::rng::Stream;

/// Default RK4 step in days.
pub const ODE_STEP: f64 = 0.01;

/// Floor applied to predicted counts used as inverse weights.
pub const WEIGHT_FLOOR: f64 = 1e-9;

const BOARDING_SCHOOL_CSV: &str = include_str!("../data/boarding_school.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirParams {
    /// Recovery rate (1/day).
    pub alpha: f64,
    /// Transmission rate (1/(person·day)).
    pub beta: f64,
}

impl SirParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(domain(format!(
                "SIR rates must be finite and >= 0, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        match theta {
            [alpha, beta] => Self::new(*alpha, *beta),
            _ => Err(Error::Dimension {
                expected: 2,
                got: theta.len(),
            }),
        }
    }
}

/// Closed population, initial compartments and observation days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicConfig {
    pub population: u64,
    pub s0: u64,
    pub i0: u64,
    pub r0: u64,
    pub obs_times: Vec<f64>,
}

impl EpidemicConfig {
    pub fn new(population: u64, s0: u64, i0: u64, r0: u64, obs_times: Vec<f64>) -> Result<Self> {
        if population == 0 || s0 + i0 + r0 != population {
            return Err(invalid(format!(
                "initial compartments {s0}+{i0}+{r0} must sum to population {population} > 0"
            )));
        }
        if obs_times.is_empty() || !obs_times.iter().all(|t| t.is_finite()) || obs_times[0] < 0.0 {
            return Err(invalid(
                "observation times must be finite, non-empty and start at t >= 0",
            ));
        }
        if obs_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("observation times must be strictly increasing"));
        }
        Ok(Self {
            population,
            s0,
            i0,
            r0,
            obs_times,
        })
    }

    pub fn len(&self) -> usize {
        self.obs_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs_times.is_empty()
    }
}

/// Infected counts at the configured observation times.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EpidemicSeries {
    pub counts: Vec<u64>,
}

/// The English boarding-school influenza outbreak: 763 pupils, one initial
/// case, and the bundled daily counts of pupils confined to bed.
pub fn boarding_school() -> (EpidemicConfig, EpidemicSeries) {
    let (times, counts) = parse_series_csv(BOARDING_SCHOOL_CSV).expect("bundled data parses");
    let cfg = EpidemicConfig::new(763, 762, 1, 0, times).expect("bundled config is valid");
    (cfg, EpidemicSeries { counts })
}

/// Parses `t,x` CSV text into observation times and counts.
pub fn parse_series_csv(text: &str) -> Result<(Vec<f64>, Vec<u64>)> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some("t,x") => {}
        other => return Err(invalid(format!("expected header `t,x`, found {other:?}"))),
    }
    let mut times = Vec::new();
    let mut counts = Vec::new();
    for (i, line) in lines.enumerate() {
        let (t, x) = line
            .split_once(',')
            .ok_or_else(|| invalid(format!("row {}: expected two fields", i + 1)))?;
        times.push(
            t.trim()
                .parse()
                .map_err(|e| invalid(format!("row {}: t: {e}", i + 1)))?,
        );
        counts.push(
            x.trim()
                .parse()
                .map_err(|e| invalid(format!("row {}: x: {e}", i + 1)))?,
        );
    }
    Ok((times, counts))
}

/// Compartment sizes `(S, I, R)`.
pub type SirState = [f64; 3];

fn sir_rhs(p: &SirParams, y: &SirState) -> SirState {
    let infection = p.beta * y[0] * y[1];
    let recovery = p.alpha * y[1];
    [-infection, infection - recovery, recovery]
}

fn rk4_step(p: &SirParams, y: &SirState, h: f64) -> SirState {
    let add =
        |y: &SirState, k: &SirState, s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]];
    let k1 = sir_rhs(p, y);
    let k2 = sir_rhs(p, &add(y, &k1, h / 2.0));
    let k3 = sir_rhs(p, &add(y, &k2, h / 2.0));
    let k4 = sir_rhs(p, &add(y, &k3, h));
    let mut out = *y;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrates the mean-field equations with classical RK4 and returns the
/// full state at each observation time.
///
/// Each interval between observations is split into equal steps no longer
/// than `step`, so observation times are hit exactly.
pub fn solve_sir_states(p: &SirParams, cfg: &EpidemicConfig, step: f64) -> Result<Vec<SirState>> {
    if !(step > 1e-12) {
        return Err(Error::Integration(format!("step size {step} underflows")));
    }
    let mut y = [cfg.s0 as f64, cfg.i0 as f64, cfg.r0 as f64];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(cfg.len());
    for &t_obs in &cfg.obs_times {
        let span = t_obs - t;
        if span > 0.0 {
            let steps = (span / step - 1e-9).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for _ in 0..steps {
                y = rk4_step(p, &y, h);
            }
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::Integration(format!("non-finite state at t={t_obs}")));
            }
        }
        t = t_obs;
        out.push(y);
    }
    Ok(out)
}

/// Mean-field infected counts `I(tₙ)` at the observation times.
pub fn solve_sir_ode(p: &SirParams, cfg: &EpidemicConfig) -> Result<Vec<f64>> {
    Ok(solve_sir_states(p, cfg, ODE_STEP)?
        .iter()
        .map(|s| s[1])
        .collect())
}

/// Integer compartments of one CTMC trajectory at the observation times.
pub type CountState = [u64; 3];

/// Exact event-by-event simulation (Gillespie direct method) with
/// infections at rate `β S I` and recoveries at rate `α I`.
pub fn simulate_ctmc_states<R: Rng + ?Sized>(
    p: &SirParams,
    cfg: &EpidemicConfig,
    rng: &mut R,
) -> Vec<CountState> {
    let (mut s, mut i, mut r) = (cfg.s0, cfg.i0, cfg.r0);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(cfg.len());
    let mut next_obs = 0;
    while next_obs < cfg.len() {
        let infection = p.beta * s as f64 * i as f64;
        let recovery = p.alpha * i as f64;
        let total = infection + recovery;
        let t_event = if total > 0.0 {
            let u: f64 = rng.random();
            t - (1.0 - u).ln() / total
        } else {
            f64::INFINITY
        };
        while next_obs < cfg.len() && cfg.obs_times[next_obs] < t_event {
            out.push([s, i, r]);
            next_obs += 1;
        }
        if t_event.is_infinite() {
            break;
        }
        t = t_event;
        let pick: f64 = rng.random::<f64>() * total;
        if pick < infection {
            s -= 1;
            i += 1;
        } else {
            i -= 1;
            r += 1;
        }
    }
    out
}

pub fn simulate_ctmc<R: Rng + ?Sized>(
    p: &SirParams,
    cfg: &EpidemicConfig,
    rng: &mut R,
) -> EpidemicSeries {
    EpidemicSeries {
        counts: simulate_ctmc_states(p, cfg, rng)
            .iter()
            .map(|s| s[1])
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedResidual {
    pub value: f64,
    /// True when some predicted count fell below [`WEIGHT_FLOOR`].
    pub floored: bool,
}

/// `Σ (xₙ − Iₙ)² / Iₙ` against a precomputed mean-field curve.
pub fn f_weighted_curve(d: &EpidemicSeries, curve: &[f64]) -> Result<WeightedResidual> {
    if d.counts.len() != curve.len() {
        return Err(Error::Dimension {
            expected: curve.len(),
            got: d.counts.len(),
        });
    }
    let mut floored = false;
    let value = d
        .counts
        .iter()
        .zip(curve)
        .map(|(&x, &i)| {
            let w = if i <= WEIGHT_FLOOR {
                floored = true;
                WEIGHT_FLOOR
            } else {
                i
            };
            (x as f64 - i).powi(2) / w
        })
        .sum();
    Ok(WeightedResidual { value, floored })
}

pub fn f_weighted(
    d: &EpidemicSeries,
    p: &SirParams,
    cfg: &EpidemicConfig,
) -> Result<WeightedResidual> {
    f_weighted_curve(d, &solve_sir_ode(p, cfg)?)
}

/// `√(F / N) / 50`.
pub fn lambda_from_residual(f: f64, count: usize) -> f64 {
    (f / count as f64).sqrt() / 50.0
}

pub fn lambda_sir(d: &EpidemicSeries, p: &SirParams, cfg: &EpidemicConfig) -> Result<f64> {
    Ok(lambda_from_residual(
        f_weighted(d, p, cfg)?.value,
        cfg.len(),
    ))
}

/// Outbreak threshold `β s0 / α`; above one, `I` grows initially.
pub fn epidemic_threshold(p: &SirParams, cfg: &EpidemicConfig) -> f64 {
    p.beta * cfg.s0 as f64 / p.alpha
}

/// The SIR simulation problem with parameters ordered `[alpha, beta]`.
#[derive(Debug, Clone)]
pub struct SirProblem {
    cfg: EpidemicConfig,
    prior: UniformBoxPrior,
}

impl SirProblem {
    pub fn new(cfg: EpidemicConfig, prior: UniformBoxPrior) -> Result<Self> {
        if prior.dim() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: prior.dim(),
            });
        }
        Ok(Self { cfg, prior })
    }

    /// `α ~ Unif(0.1, 0.9)` and `β·10³/5 ~ Unif(0.25, 0.65)`.
    pub fn default_prior() -> UniformBoxPrior {
        UniformBoxPrior::new(vec![0.1, 1.25e-3], vec![0.9, 3.25e-3]).expect("static bounds")
    }

    pub fn config(&self) -> &EpidemicConfig {
        &self.cfg
    }
}

impl Problem for SirProblem {
    type Data = EpidemicSeries;

    fn param_names(&self) -> Vec<String> {
        vec!["alpha".into(), "beta".into()]
    }

    fn prior(&self) -> &UniformBoxPrior {
        &self.prior
    }

    fn simulate(&self, theta: &[f64], rng: &mut Stream) -> Result<EpidemicSeries> {
        Ok(simulate_ctmc(
            &SirParams::from_slice(theta)?,
            &self.cfg,
            rng,
        ))
    }

    fn statistic(&self, data: &EpidemicSeries, theta: &[f64]) -> Result<f64> {
        Ok(self.statistics(&[data], theta)?[0])
    }

    fn statistics(&self, datasets: &[&EpidemicSeries], theta: &[f64]) -> Result<Vec<f64>> {
        let curve = solve_sir_ode(&SirParams::from_slice(theta)?, &self.cfg)?;
        datasets
            .iter()
            .map(|d| {
                Ok(lambda_from_residual(
                    f_weighted_curve(d, &curve)?.value,
                    self.cfg.len(),
                ))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, SeedSpec};

    fn daily(n: usize) -> Vec<f64> {
        (1..=n).map(|d| d as f64).collect()
    }

    #[test]
    fn config_validation() {
        assert!(EpidemicConfig::new(10, 5, 5, 1, daily(3)).is_err());
        assert!(EpidemicConfig::new(10, 9, 1, 0, vec![1.0, 1.0]).is_err());
        assert!(EpidemicConfig::new(10, 9, 1, 0, vec![-1.0, 1.0]).is_err());
        assert!(EpidemicConfig::new(0, 0, 0, 0, daily(2)).is_err());
    }

    #[test]
    fn bundled_data() {
        let (cfg, data) = boarding_school();
        assert_eq!(cfg.len(), 13);
        assert_eq!(data.counts.len(), 13);
        assert_eq!(cfg.population, 763);
    }

    #[test]
    fn no_transmission_is_exponential_decay() {
        let cfg = EpidemicConfig::new(1000, 900, 100, 0, daily(10)).unwrap();
        let p = SirParams::new(0.3, 0.0).unwrap();
        for (t, i) in cfg.obs_times.iter().zip(solve_sir_ode(&p, &cfg).unwrap()) {
            let exact = 100.0 * (-0.3 * t).exp();
            assert!(((i - exact) / exact).abs() < 1e-6);
        }
    }

    #[test]
    fn everyone_infected_stays_infected() {
        let cfg = EpidemicConfig::new(50, 0, 50, 0, daily(5)).unwrap();
        let p = SirParams::new(0.0, 0.01).unwrap();
        assert!(solve_sir_ode(&p, &cfg).unwrap().iter().all(|&i| i == 50.0));
    }

    #[test]
    fn ode_conserves_and_self_converges() {
        let (cfg, _) = boarding_school();
        let p = SirParams::new(0.45, 2.2e-3).unwrap();
        let coarse = solve_sir_states(&p, &cfg, ODE_STEP).unwrap();
        let fine = solve_sir_states(&p, &cfg, ODE_STEP / 2.0).unwrap();
        for (c, f) in coarse.iter().zip(&fine) {
            assert!((c.iter().sum::<f64>() - 763.0).abs() < 1e-8 * 763.0);
            assert!(c.iter().all(|&v| v >= -1e-9));
            assert!(((c[1] - f[1]) / f[1]).abs() < 1e-6);
        }
        for w in coarse.windows(2) {
            assert!(w[1][0] <= w[0][0] && w[1][2] >= w[0][2]);
        }
    }

    #[test]
    fn ctmc_absorbing_and_conserving() {
        let cfg = EpidemicConfig::new(100, 100, 0, 0, daily(5)).unwrap();
        let p = SirParams::new(0.5, 0.01).unwrap();
        let mut rng = derive_stream(SeedSpec::new(1), 0);
        assert_eq!(simulate_ctmc(&p, &cfg, &mut rng).counts, vec![0; 5]);

        let (cfg, _) = boarding_school();
        let p = SirParams::new(0.45, 2.2e-3).unwrap();
        for k in 0..50 {
            let states = simulate_ctmc_states(&p, &cfg, &mut derive_stream(SeedSpec::new(2), k));
            assert_eq!(states.len(), 13);
            assert!(states.iter().all(|s| s.iter().sum::<u64>() == 763));
            for w in states.windows(2) {
                assert!(w[1][0] <= w[0][0] && w[1][2] >= w[0][2]);
            }
        }
    }

    #[test]
    fn ctmc_without_recovery_infects_everyone() {
        let cfg = EpidemicConfig::new(200, 199, 1, 0, vec![100.0]).unwrap();
        let p = SirParams::new(0.0, 0.5).unwrap();
        let mut rng = derive_stream(SeedSpec::new(3), 0);
        assert_eq!(simulate_ctmc(&p, &cfg, &mut rng).counts, vec![200]);
    }

    #[test]
    fn weighted_residual_spot_values() {
        let f = f_weighted_curve(&EpidemicSeries { counts: vec![12] }, &[9.0]).unwrap();
        assert_eq!(f.value, 1.0);
        assert!(!f.floored);
        let f = f_weighted_curve(&EpidemicSeries { counts: vec![1] }, &[0.0]).unwrap();
        assert!(f.floored && f.value.is_finite());
        assert!(f_weighted_curve(&EpidemicSeries { counts: vec![1, 2] }, &[1.0]).is_err());
        assert_eq!(lambda_from_residual(0.0, 13), 0.0);
        assert!((lambda_from_residual(13.0 * 2500.0, 13) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rounded_curve_residual_bound() {
        let cfg = EpidemicConfig::new(100_000, 90_000, 10_000, 0, daily(5)).unwrap();
        let p = SirParams::new(0.2, 1e-6).unwrap();
        let curve = solve_sir_ode(&p, &cfg).unwrap();
        assert!(curve.iter().all(|&i| i >= 100.0));
        let d = EpidemicSeries {
            counts: curve.iter().map(|i| i.round() as u64).collect(),
        };
        let f = f_weighted_curve(&d, &curve).unwrap().value;
        assert!(f <= 0.25 * curve.len() as f64 / 100.0);
    }

    #[test]
    fn rounded_boarding_school_curve_has_small_statistic() {
        let (cfg, _) = boarding_school();
        let p = SirParams::new(0.45, 2.2e-3).unwrap();
        let curve = solve_sir_ode(&p, &cfg).unwrap();
        let d = EpidemicSeries {
            counts: curve.iter().map(|i| i.round() as u64).collect(),
        };
        assert!(lambda_sir(&d, &p, &cfg).unwrap() < 0.01);
    }

    #[test]
    fn threshold_values() {
        let cfg = EpidemicConfig::new(763, 762, 1, 0, daily(3)).unwrap();
        let p = SirParams::new(0.762, 1e-3).unwrap();
        assert!((epidemic_threshold(&p, &cfg) - 1.0).abs() < 1e-15);
        let p = SirParams::new(0.45, 2.2e-3).unwrap();
        assert!((epidemic_threshold(&p, &cfg) - 2.2e-3 * 762.0 / 0.45).abs() < 1e-12);
        assert!((epidemic_threshold(&p, &cfg) - 3.725_333).abs() < 1e-5);
    }

    #[test]
    fn threshold_predicts_initial_growth() {
        let mut rng = derive_stream(SeedSpec::new(4), 0);
        for _ in 0..100 {
            let alpha = rng.random_range(0.05..1.0);
            let beta = rng.random_range(1e-4..5e-3);
            let i0 = rng.random_range(1..20u64);
            let cfg = EpidemicConfig::new(763, 763 - i0, i0, 0, daily(1)).unwrap();
            let p = SirParams::new(alpha, beta).unwrap();
            let growth = sir_rhs(&p, &[cfg.s0 as f64, i0 as f64, 0.0])[1];
            assert_eq!(epidemic_threshold(&p, &cfg) > 1.0, growth > 0.0);
        }
    }
}
