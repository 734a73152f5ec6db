#![allow(dead_code)]

use robust_mca::func::ScalarFn;
use robust_mca::model::CoefficientBand;

/// Bands every kernel kind is exercised on. All but the last have `C <= 1.5`,
/// which keeps the martingale kernel defined for `h <= 1/10`.
pub fn band_catalogue() -> Vec<(&'static str, CoefficientBand)> {
    vec![
        ("constant", CoefficientBand::constant(-0.5, 0.5, 0.8, 1.4, 1.5)),
        (
            "state_dependent",
            CoefficientBand {
                b_lower: ScalarFn::Clamp { lo: -1.0, hi: 0.0 },
                b_upper: ScalarFn::Clamp { lo: 0.0, hi: 1.0 },
                a_lower: ScalarFn::Clamp { lo: 0.7, hi: 1.0 },
                a_upper: ScalarFn::Clamp { lo: 1.0, hi: 1.45 },
                bound_c: 1.5,
            },
        ),
        ("zero_drift", CoefficientBand::constant(0.0, 0.0, 1.0, 1.5, 1.5)),
        ("degenerate", CoefficientBand::constant(0.0, 0.0, 1.0, 1.0, 1.5)),
        ("cev_cutoff", CoefficientBand::cev_cutoff()),
    ]
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`, by
/// Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            dp = nf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `E[f(Z)]` for standard normal `Z`, with `f` smooth between the given kinks.
/// Each piece of `[-12, 12]` is split into unit cells integrated by a 20-point
/// Gauss–Legendre rule; the mass outside is below `1e-32`.
pub fn normal_expectation(f: impl Fn(f64) -> f64, kinks: &[f64]) -> f64 {
    let (x, w) = gauss_legendre(20);
    let mut cuts: Vec<f64> = (-12..=12).map(f64::from).chain(kinks.iter().copied()).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let density = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut total = 0.0;
    for c in cuts.windows(2) {
        let (mid, half) = (0.5 * (c[0] + c[1]), 0.5 * (c[1] - c[0]));
        for (t, wt) in x.iter().zip(&w) {
            let z = mid + half * t;
            total += half * wt * f(z) * density(z);
        }
    }
    total
}

#[test]
fn quadrature_integrates_moments() {
    assert!((normal_expectation(|_| 1.0, &[]) - 1.0).abs() < 1e-14);
    assert!((normal_expectation(|z| z * z, &[]) - 1.0).abs() < 1e-13);
    assert!((normal_expectation(|z| z.powi(4), &[]) - 3.0).abs() < 1e-12);
    let half = normal_expectation(|z| z.max(0.0), &[0.0]);
    assert!((half - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-14);
}
