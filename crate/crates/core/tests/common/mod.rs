//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

/// Gauss–Kronrod 7/15 nodes on [−1, 1] (positive half, center last).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the odd Kronrod nodes 1, 3, 5 and the center.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, (k - g).abs() * h)
}

/// Globally adaptive Gauss–Kronrod quadrature of `f` over `[a, b]` to a
/// relative tolerance `rel`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    use std::collections::BinaryHeap;

    /// A panel ordered by its error estimate.
    struct Panel(f64, f64, f64, f64);
    impl PartialEq for Panel {
        fn eq(&self, o: &Self) -> bool {
            self.3 == o.3
        }
    }
    impl Eq for Panel {}
    impl PartialOrd for Panel {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Panel {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            self.3.total_cmp(&o.3)
        }
    }

    let f: &dyn Fn(f64) -> f64 = &f;
    let (v, e) = gk15(f, a, b);
    let (mut total, mut err) = (v, e);
    let mut heap = BinaryHeap::from([Panel(a, b, v, e)]);
    for _ in 0..20_000 {
        if err <= rel * total.abs() || err < 1e-300 {
            break;
        }
        let Panel(lo, hi, v, e) = heap.pop().unwrap();
        let mid = 0.5 * (lo + hi);
        let (lv, le) = gk15(f, lo, mid);
        let (rv, re) = gk15(f, mid, hi);
        total += lv + rv - v;
        err += le + re - e;
        heap.push(Panel(lo, mid, lv, le));
        heap.push(Panel(mid, hi, rv, re));
    }
    // Sum small pieces first.
    let mut vals: Vec<f64> = heap.iter().map(|p| p.2).collect();
    vals.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    vals.iter().sum()
}

/// `∫₀ˣ t^{a−1} e^{−t} dt` by quadrature. For `a < 1` the substitution
/// `t = s^{1/a}` removes the endpoint singularity.
pub fn lower_gamma_quad(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if a < 1.0 {
        integrate(|s| (-s.powf(1.0 / a)).exp(), 0.0, x.powf(a), 1e-15) / a
    } else {
        // Split at the mode so the peak sits on a panel boundary.
        let m = (a - 1.0).min(x);
        let g = |t: f64| {
            if t == 0.0 {
                if a == 1.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                ((a - 1.0) * t.ln() - t).exp()
            }
        };
        let left = if m > 0.0 {
            integrate(g, 0.0, m, 1e-15)
        } else {
            0.0
        };
        left + if x > m {
            integrate(g, m, x, 1e-15)
        } else {
            0.0
        }
    }
}

/// `Ω(a) = exp(aⁿ − 1) / a³`.
pub fn omega(a: f64, n: f64) -> f64 {
    (a.powf(n) - 1.0).exp() / a.powi(3)
}

/// `u(z) = ∫_{1/(1+z)}^1 da / (a² √Ω(a))` by quadrature.
pub fn u_quad(z: f64, n: f64) -> f64 {
    integrate(
        |a| 1.0 / (a * a * omega(a, n).sqrt()),
        1.0 / (1.0 + z),
        1.0,
        1e-14,
    )
}

/// `ℋ0 t0 = ∫₀¹ da / (a √Ω(a))` by quadrature.
pub fn h0t0_quad(n: f64) -> f64 {
    integrate(
        |a| {
            if a == 0.0 {
                0.0
            } else {
                1.0 / (a * omega(a, n).sqrt())
            }
        },
        0.0,
        1.0,
        1e-14,
    )
}

/// A 580-record catalog with redshifts spread over the Union 2.1 range and
/// deterministic uncertainties; moduli are filled in by the caller.
pub fn synthetic_template() -> alffi::cosmo::SupernovaCatalog {
    use alffi::cosmo::{SupernovaCatalog, SupernovaRecord};
    let records = (0..580)
        .map(|i| {
            let f = i as f64 / 579.0;
            let z = 0.015 * (1.414f64 / 0.015).powf(f);
            let sigma = 0.1 + 0.2 * f + 0.05 * ((i * 7919) % 13) as f64 / 13.0;
            SupernovaRecord { z, x: 0.0, sigma }
        })
        .collect();
    SupernovaCatalog::new(records).unwrap()
}
