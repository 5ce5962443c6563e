//! The conditional law of `A - B` given `A + B = s`, checked against direct
//! quadrature of the closed-form joint density along the line `a + b = s`.

use std::f64::consts::PI;

use kmtc_core::dist::{build_density, FamilySpec1D};
use kmtc_core::numerics::{conditional_diff_cdf, Grid};

fn poly_pdf(tau: f64, d: f64) -> impl Fn(f64) -> f64 {
    let t2 = tau * tau;
    move |x| (4.0 + t2 * (d - 1.0) + t2 * x * x) * (-0.5 * x * x).exp() / ((2.0 * PI).sqrt() * (4.0 + t2 * d))
}

fn gauss_pdf(var: f64) -> impl Fn(f64) -> f64 {
    move |x| (-0.5 * x * x / var).exp() / (2.0 * PI * var).sqrt()
}

/// Composite Simpson on `[lo, hi]` with an even number of panels of width about `h`.
fn simpson(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, h: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let n = 2 * ((hi - lo) / (2.0 * h)).ceil().max(1.0) as usize;
    let dx = (hi - lo) / n as f64;
    let inner: f64 = (1..n).map(|i| f(lo + i as f64 * dx) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(lo) + f(hi) + inner) * dx / 3.0
}

/// `P(A - B <= w | A + B = s)`: `A - B = 2A - s`, so integrate over `a <= (s + w)/2`.
fn oracle(p: &impl Fn(f64) -> f64, q: &impl Fn(f64) -> f64, s: f64, w: f64) -> f64 {
    let joint = |a: f64| p(a) * q(s - a);
    let (lo, hi) = (s / 2.0 - 20.0, s / 2.0 + 20.0);
    let cut = ((s + w) / 2.0).clamp(lo, hi);
    let below = simpson(&joint, lo, cut, 2e-3);
    let above = simpson(&joint, cut, hi, 2e-3);
    below / (below + above)
}

fn sup_error(pf: &FamilySpec1D, qf: &FamilySpec1D, p: impl Fn(f64) -> f64, q: impl Fn(f64) -> f64, s: f64) -> f64 {
    let step = 1.0 / 32.0;
    let pg = build_density(pf, &Grid::covering(16.0, step).unwrap()).unwrap();
    let qg = build_density(qf, &Grid::covering(16.0, step).unwrap()).unwrap();
    let c = conditional_diff_cdf(&pg, &qg, s).unwrap();
    (0..=160)
        .map(|i| -8.0 + 0.1 * i as f64)
        .map(|w| (c.eval(w) - oracle(&p, &q, s, w)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn poly_gaussian_pair() {
    let f = FamilySpec1D::poly_gaussian(0.5, 1);
    let err = sup_error(&f, &f, poly_pdf(0.5, 1.0), poly_pdf(0.5, 1.0), 0.7);
    assert!(err <= 1e-7, "{err:e}");
}

#[test]
fn unequal_factors() {
    let f = FamilySpec1D::poly_gaussian(1.0, 2);
    let g = FamilySpec1D::gaussian(2.0);
    for s in [-1.9, 0.0, 2.4] {
        let err = sup_error(&f, &g, poly_pdf(1.0, 2.0), gauss_pdf(2.0), s);
        assert!(err <= 1e-7, "s = {s}: {err:e}");
    }
}
