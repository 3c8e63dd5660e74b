//! End-to-end acceptance suite. Every criterion runs in sequence inside one
//! test so the timings are not distorted by other tests, and prints a single
//! `PASS` or `FAIL` line. The suite fails if any criterion that could run
//! failed. A criterion whose external input is missing prints `FAIL` with the
//! reason and is also exposed as an ignored test that fails on its own.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use alffi::cosmo::{age_and_rip, fit_chi2, u_of_z, CosmoParams};
use alffi::inference::{cdf_eval, coverage, make_observed_triples, CdfEstimate, HistogramCdf};
use alffi::nn::{param_count, Activation, FeatureMap, MlpModel, MlpSpec};
use alffi::onoff::{lambda_onoff, OnOffData, OnOffParams, OnOffProblem};
use alffi::sir::{simulate_ctmc_states, solve_sir_ode, EpidemicConfig, SirParams};
use alffi::specfun::{lower_incomplete_gamma, normal_cdf};
use alffi::toy::GaussianToy;
use alffi::{derive_stream, Problem, SeedSpec};
use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

/// Environment variable naming a Union 2.1 catalog in `z,x,sigma` form.
const UNION_ENV: &str = "ALFFI_UNION_CATALOG";

enum Outcome {
    Pass(String),
    Fail(String),
    /// Could not run because an external input is missing.
    Missing(String),
}

struct Suite {
    failed: Vec<&'static str>,
    missing: Vec<&'static str>,
}

impl Suite {
    fn run(&mut self, name: &'static str, budget: Duration, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let late = took > budget;
        let (verdict, detail) = match outcome {
            Outcome::Pass(d) if !late => ("PASS", d),
            Outcome::Pass(d) => ("FAIL", format!("{d}; over the {budget:?} budget")),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::Missing(d) => {
                self.missing.push(name);
                println!("FAIL {name}: {d}");
                return;
            }
        };
        if verdict == "FAIL" {
            self.failed.push(name);
        }
        println!("{verdict} {name}: {detail} [{:.1}s]", took.as_secs_f64());
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_alffi")
}

fn alffi(args: &[&str]) -> std::process::Output {
    let out = Command::new(bin())
        .args(args)
        .output()
        .expect("spawn alffi");
    assert!(
        out.status.success(),
        "alffi {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn sha256(path: &Path) -> String {
    let bytes = std::fs::read(path).expect("read output");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn dir_arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn union_fit() -> Outcome {
    let Some(path) = std::env::var_os(UNION_ENV) else {
        return Outcome::Missing(format!(
            "Union 2.1 catalog not available offline; set {UNION_ENV} to a z,x,sigma CSV to run it"
        ));
    };
    let catalog = match alffi_cli::io::read_catalog(Path::new(&path)) {
        Ok(c) => c,
        Err(e) => return Outcome::Fail(format!("cannot read catalog: {e:#}")),
    };
    let prior = alffi::UniformBoxPrior::new(vec![0.05, 66.0], vec![0.65, 76.0]).unwrap();
    match fit_chi2(&catalog, &prior, SeedSpec::new(1)) {
        Ok(fit) => {
            let r = fit.chi2_per_ndf();
            check(
                (r - 0.98).abs() <= 0.02,
                format!(
                    "chi2/ndf = {r:.4} at n = {:.4}, H0 = {:.3}",
                    fit.theta.n, fit.theta.h0
                ),
            )
        }
        Err(e) => Outcome::Fail(format!("fit failed: {e}")),
    }
}

fn closed_forms() -> Outcome {
    let mut worst_u: f64 = 0.0;
    let mut worst_age: f64 = 0.0;
    for i in 0..20 {
        let z = 0.015 + (1.414 - 0.015) * i as f64 / 19.0;
        for j in 0..20 {
            let n = 0.05 + 0.6 * j as f64 / 19.0;
            let theta = CosmoParams::new(n, 70.0).unwrap();
            worst_u = worst_u.max((u_of_z(z, &theta).unwrap() - common::u_quad(z, n)).abs());
            if i == 0 {
                worst_age = worst_age
                    .max((age_and_rip(&theta).unwrap().h0_t0 - common::h0t0_quad(n)).abs());
            }
        }
    }
    check(
        worst_u <= 1e-8 && worst_age <= 1e-8,
        format!(
            "max |u - quad| = {worst_u:.2e}, max |H0 t0 - quad| = {worst_age:.2e} on 20x20 (z, n)"
        ),
    )
}

fn special_functions() -> Outcome {
    let mut rng = derive_stream(SeedSpec::new(5), 0);
    let pairs: Vec<(f64, f64)> = (0..1000)
        .map(|_| (rng.random_range(0.05..=50.0), rng.random_range(0.0..=100.0)))
        .collect();
    let worst_quad = pairs
        .par_iter()
        .map(|&(a, x)| {
            let want = common::lower_gamma_quad(a, x);
            let got = lower_incomplete_gamma(a, x).unwrap();
            (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
        })
        .reduce(|| 0.0, f64::max);
    let worst_rec = pairs
        .iter()
        .map(|&(a, x)| {
            let lhs = lower_incomplete_gamma(a + 1.0, x).unwrap();
            let ag = a * lower_incomplete_gamma(a, x).unwrap();
            let rhs = ag - x.powf(a) * (-x).exp();
            (lhs - rhs).abs() / ag.abs().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    check(
        worst_quad <= 1e-10 && worst_rec <= 1e-10,
        format!("1000 random (a, x): max relative error vs quadrature {worst_quad:.2e}, recurrence {worst_rec:.2e}"),
    )
}

fn architecture() -> Outcome {
    let spec = MlpSpec::new(vec![3, 20, 20, 20, 20, 20, 1], Activation::Relu, false).unwrap();
    let n = param_count(&spec);
    check(n == 1781, format!("param_count = {n}"))
}

fn max_gradient_error(spec: MlpSpec, seed: u64) -> f64 {
    let d = spec.inputs();
    let mut model = MlpModel::init(spec, FeatureMap::identity(d), SeedSpec::new(seed)).unwrap();
    let mut rng = derive_stream(SeedSpec::new(seed), 99);
    for p in model.params_mut() {
        *p += rng.random_range(-0.3..0.3);
    }
    let batch = 16;
    let x: Vec<f64> = (0..batch * d)
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    let y: Vec<f64> = (0..batch)
        .map(|_| if rng.random::<f64>() < 0.5 { 0.0 } else { 1.0 })
        .collect();
    let (_, grads) = model.loss_and_grad(&x, &y).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (i, &g) in grads.iter().enumerate() {
        let orig = model.params()[i];
        model.params_mut()[i] = orig + h;
        let (up, _) = model.loss_and_grad(&x, &y).unwrap();
        model.params_mut()[i] = orig - h;
        let (down, _) = model.loss_and_grad(&x, &y).unwrap();
        model.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let scale = g.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((g - numeric).abs() / scale);
    }
    worst
}

fn gradients() -> Outcome {
    let cases = [
        (vec![3, 7, 5, 1], Activation::Relu, false),
        (vec![3, 6, 6, 1], Activation::Prelu, false),
        (vec![3, 6, 5, 1], Activation::Prelu, true),
        (vec![2, 5, 4, 1], Activation::Relu, true),
    ];
    let worst = cases
        .into_iter()
        .enumerate()
        .map(|(k, (sizes, act, bn))| {
            max_gradient_error(MlpSpec::new(sizes, act, bn).unwrap(), k as u64 + 1)
        })
        .fold(0.0, f64::max);
    check(
        worst <= 1e-4,
        format!("max relative error {worst:.2e} over relu, prelu and normalized networks"),
    )
}

fn load_model(path: &Path) -> CdfEstimate {
    CdfEstimate::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn gaussian_toy(dir: &Path) -> Outcome {
    let out = dir_arg(dir);
    alffi(&["--problem", "toy", "--out-dir", out, "make-train"]);
    alffi(&["--problem", "toy", "--out-dir", out, "train"]);
    let est = load_model(&dir.join("model.json"));
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let l0 = -3.0 + 6.0 * i as f64 / 49.0;
        for j in 0..50 {
            let theta = -2.0 + 4.0 * j as f64 / 49.0;
            let got = cdf_eval(&est, l0, &[theta]).unwrap().value;
            worst = worst.max((got - normal_cdf(l0 - theta)).abs());
        }
    }
    check(
        worst <= 0.05,
        format!("sup |cdf - Phi(l0 - theta)| = {worst:.4} on 50x50 after 2e5 triples"),
    )
}

fn onoff_coverage(dir: &Path) -> Outcome {
    let out = dir_arg(dir);
    alffi(&["--problem", "onoff", "--out-dir", out, "make-train"]);
    alffi(&["--problem", "onoff", "--out-dir", out, "train"]);
    alffi(&[
        "--problem",
        "onoff",
        "--out-dir",
        out,
        "--set",
        "taus=[0.68, 0.9]",
        "coverage",
        "--points",
        "5",
        "-T",
        "2000",
    ]);
    let (header, rows) = alffi_cli::io::read_table(&dir.join("coverage.csv")).unwrap();
    assert_eq!(header, ["mu", "nu", "tau", "p", "stderr", "T"]);
    let devs: Vec<f64> = rows
        .iter()
        .map(|r| (r[3].parse::<f64>().unwrap() - r[2].parse::<f64>().unwrap()).abs())
        .collect();
    let worst = devs.iter().copied().fold(0.0, f64::max);
    check(
        rows.len() == 50 && worst <= 0.05,
        format!(
            "{} (point, tau) pairs after 1e6 triples, T = 2000: max |p - tau| = {worst:.4}",
            rows.len()
        ),
    )
}

fn exact_cdf_coverage() -> Outcome {
    let toy = GaussianToy::new(GaussianToy::default_prior()).unwrap();
    let taus = [0.68, 0.9, 0.95];
    let mut worst_pull: f64 = 0.0;
    for (k, theta) in [-1.5, 0.0, 1.2].into_iter().enumerate() {
        let rows = coverage(
            &CdfEstimate::GaussianExact,
            &toy,
            &[theta],
            &taus,
            4000,
            SeedSpec::new(60 + k as u64),
        )
        .unwrap();
        for r in rows.rows {
            worst_pull = worst_pull.max(r.pull().abs());
        }
    }
    check(
        worst_pull <= 3.0,
        format!("max |p - tau| / stderr = {worst_pull:.2} at T = 4000"),
    )
}

fn histogram_oracle() -> Outcome {
    let problem = OnOffProblem::default();
    let observed = OnOffData::new(3, 7);
    let draws = 10_000;
    let set = make_observed_triples(&problem, &observed, 250_000, SeedSpec::new(31)).unwrap();
    let hist =
        HistogramCdf::from_triples(&set.triples, problem.prior().clone(), vec![10, 10]).unwrap();
    let (c0, c1) = (hist.centers(0), hist.centers(1));
    let verdicts: Vec<Option<bool>> = (0..100usize)
        .into_par_iter()
        .map(|k| {
            let n = hist.h1()[k];
            if n == 0.0 {
                return None;
            }
            let p = hist.hz()[k] / n;
            let theta = [c0[k / 10], c1[k % 10]];
            let l0 = problem.statistic(&observed, &theta).unwrap();
            let mut rng = derive_stream(SeedSpec::new(32), k as u64);
            let hits = (0..draws)
                .filter(|_| {
                    problem
                        .statistic(&problem.simulate(&theta, &mut rng).unwrap(), &theta)
                        .unwrap()
                        <= l0
                })
                .count();
            let q = hits as f64 / draws as f64;
            let se = (p * (1.0 - p) / n + q * (1.0 - q) / draws as f64).sqrt();
            Some((p - q).abs() <= 3.0 * se.max(1e-12))
        })
        .collect();
    let populated: Vec<bool> = verdicts.into_iter().flatten().collect();
    let frac = populated.iter().filter(|&&b| b).count() as f64 / populated.len() as f64;
    check(
        frac >= 0.95,
        format!(
            "{:.0}% of {} populated bins within 3 standard errors",
            100.0 * frac,
            populated.len()
        ),
    )
}

fn sir_mean_field() -> Outcome {
    let population = 100_000;
    let i0 = 100;
    let s0 = population - i0;
    let times: Vec<f64> = (1..=120).map(|k| 0.5 * k as f64).collect();
    let cfg = EpidemicConfig::new(population, s0, i0, 0, times).unwrap();
    let p = SirParams::new(0.45, 0.9 / s0 as f64).unwrap();
    let ode = solve_sir_ode(&p, &cfg).unwrap();
    let (peak, peak_value) =
        ode.iter().enumerate().fold(
            (0, 0.0),
            |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc },
        );
    let runs: Vec<Vec<[u64; 3]>> = (0..200u64)
        .into_par_iter()
        .map(|k| simulate_ctmc_states(&p, &cfg, &mut derive_stream(SeedSpec::new(41), k)))
        .collect();
    let conserved = runs
        .iter()
        .all(|r| r.iter().all(|s| s[0] + s[1] + s[2] == population));
    let mean = runs.iter().map(|r| r[peak][1] as f64).sum::<f64>() / runs.len() as f64;
    let rel = (mean - peak_value).abs() / peak_value;
    check(
        conserved && rel < 0.05,
        format!("CTMC mean {mean:.0} vs ODE {peak_value:.0} at the peak (relative {rel:.4}); conservation {conserved}"),
    )
}

fn spot_values() -> Outcome {
    let d = OnOffData::new(3, 7);
    let at_null = lambda_onoff(d, OnOffParams::new(0.0, 5.0).unwrap());
    let l = lambda_onoff(d, OnOffParams::new(1.0, 5.0).unwrap());
    let err = (l - (2.0 - 6.0 * 1.2f64.ln())).abs();
    check(
        at_null == 0.0 && err <= 1e-12,
        format!("lambda(mu=0) = {at_null}, |lambda(mu=1) - (2 - 6 ln 1.2)| = {err:.1e}"),
    )
}

fn determinism(root: &Path, model: &Path) -> Outcome {
    let model = dir_arg(model);
    let mut hashes: Vec<(String, String)> = Vec::new();
    for (run, threads) in [("a", "1"), ("b", "1"), ("c", "8")] {
        let dir: PathBuf = root.join(run);
        let out = dir_arg(&dir);
        alffi(&[
            "--problem",
            "onoff",
            "--threads",
            threads,
            "--out-dir",
            out,
            "make-train",
            "--count",
            "50000",
        ]);
        alffi(&[
            "--problem",
            "onoff",
            "--threads",
            threads,
            "--out-dir",
            out,
            "coverage",
            "--estimator",
            model,
            "--points",
            "3",
            "-T",
            "300",
        ]);
        hashes.push((
            sha256(&dir.join("train.csv")),
            sha256(&dir.join("coverage.csv")),
        ));
    }
    let same = hashes.windows(2).all(|w| w[0] == w[1]);
    check(
        same,
        format!("train.csv and coverage.csv hashes equal across reruns and 1 vs 8 threads: {same}"),
    )
}

#[test]
fn acceptance_suite() {
    let tmp = tempfile::tempdir().unwrap();
    let mut suite = Suite {
        failed: Vec::new(),
        missing: Vec::new(),
    };
    let min = |m: u64| Duration::from_secs(60 * m);
    suite.run("cosmology baseline fit", min(1), union_fit);
    suite.run("closed form vs quadrature", min(1), closed_forms);
    suite.run(
        "special functions",
        Duration::from_secs(10),
        special_functions,
    );
    suite.run(
        "architecture fidelity",
        Duration::from_secs(1),
        architecture,
    );
    suite.run("gradient correctness", Duration::from_secs(30), gradients);
    let toy = tmp.path().join("toy");
    suite.run("gaussian toy estimator accuracy", min(5), || {
        gaussian_toy(&toy)
    });
    let onoff = tmp.path().join("onoff");
    suite.run("on/off coverage", min(15), || onoff_coverage(&onoff));
    suite.run("exact-cdf coverage control", min(1), exact_cdf_coverage);
    suite.run("histogram oracle agreement", min(5), histogram_oracle);
    suite.run("sir mean-field limit", min(5), sir_mean_field);
    suite.run(
        "on/off statistic spot values",
        Duration::from_secs(1),
        spot_values,
    );
    suite.run("determinism", min(5), || {
        determinism(&tmp.path().join("det"), &onoff.join("model.json"))
    });
    if !suite.missing.is_empty() {
        println!("not run for missing inputs: {}", suite.missing.join(", "));
    }
    assert!(
        suite.failed.is_empty(),
        "failed: {}",
        suite.failed.join(", ")
    );
}

/// Red until a Union 2.1 catalog is supplied through the environment.
#[test]
#[ignore = "needs the Union 2.1 catalog in ALFFI_UNION_CATALOG"]
fn cosmology_baseline_fit() {
    match union_fit() {
        Outcome::Pass(d) => println!("PASS cosmology baseline fit: {d}"),
        Outcome::Fail(d) | Outcome::Missing(d) => panic!("FAIL cosmology baseline fit: {d}"),
    }
}
