use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{ProbePoint, ProbeReport, TiltedCf};
use crate::dist::{conjugate_parts, ProductFamily};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothnessSetup {
    pub rho: f64,
    pub level: u32,
    /// Leading coordinates of the (sum, difference) block vector kept; `1..=2d`.
    pub j: usize,
    /// Tilts are tested at `|h| tau` equal to each fraction (plus `h = 0`).
    pub h_fractions: Vec<f64>,
    /// Radial bins used to split the integral at the ball boundary.
    pub bins: usize,
    pub points_per_sd: f64,
}

impl Default for SmoothnessSetup {
    fn default() -> Self {
        Self {
            rho: 4.0,
            level: 1,
            j: 1,
            h_fractions: vec![0.5, 0.9],
            bins: 2048,
            points_per_sd: 32.0,
        }
    }
}

/// `|R_a(u)|^power`, contributing `weight * u^2` to the squared radius.
#[derive(Debug, Clone, Copy)]
struct Factor {
    coord: usize,
    tilt: f64,
    power: u32,
    weight: f64,
}

/// `|CF|` of one coordinate's conjugate law sampled at `u = k * du`.
struct Profile {
    values: Vec<f64>,
}

/// Checks `int_{rho |t| tau j >= 1} |F_h(t)| dt <= (2 pi)^{j/2} tau j^{3/2} / (sigma sqrt(det D))`
/// for the law `F` of the first `j` coordinates of `(S, D)`, where `S` and
/// `D` are the sum and difference of the two halves of a level-`n` block of
/// i.i.d. vectors from `family`. `D = cov F` and `sigma^2` is its smallest
/// eigenvalue.
///
/// The CF of `F` factorizes over coordinates and, after the rotation
/// `(t1, t2) -> (t1 + t2, t1 - t2)` on paired coordinates, into
/// one-dimensional factors `|R_a(u)|^M`. Each factor's mass is binned by its
/// contribution to `|t|^2`, and the binned measures are convolved to get the
/// mass inside the excluded ball; the integral is the total minus that.
pub fn check_smoothness_integrals(family: &ProductFamily, tau: f64, setup: &SmoothnessSetup) -> Result<ProbeReport> {
    let d = family.dim();
    let (n, j) = (setup.level, setup.j);
    if n == 0 || n > 20 {
        return Err(Error::Config(format!("smoothness level {n} outside 1..=20")));
    }
    if j == 0 || j > 2 * d {
        return Err(Error::Config(format!("j = {j} outside 1..={}", 2 * d)));
    }
    if !(tau >= 0.0 && tau.is_finite() && setup.rho > 0.0) {
        return Err(Error::Domain(format!("tau = {tau}, rho = {}", setup.rho)));
    }
    let block = (1u64 << n) as f64;
    let vars: Vec<f64> = family.coords.iter().map(|c| c.moments().1).collect();
    // D is diagonal: sums over coordinates 0..d, then differences over 0..j-d
    let diag: Vec<f64> = (0..j).map(|i| block * vars[i % d]).collect();
    let sigma = diag.iter().cloned().fold(f64::INFINITY, f64::min).sqrt();
    let det_sqrt = diag.iter().map(|v| v.sqrt()).product::<f64>();
    let jf = j as f64;
    let bound = (2.0 * PI).powf(0.5 * jf) * tau * jf.powf(1.5) / (sigma * det_sqrt);
    let label = format!("n={n},j={j}");

    if tau == 0.0 {
        // the excluded ball is all of R^j
        return Ok(ProbeReport::from_points("smoothness", vec![ProbePoint::new(label, 0.0, 0.0, bound, 0.0)])
            .note("tau = 0: integration region is empty"));
    }
    let r0 = 1.0 / (setup.rho * tau * jf);

    let mut hs = vec![vec![0.0; j]];
    for &frac in &setup.h_fractions {
        let len = frac / tau;
        let mut e1 = vec![0.0; j];
        e1[0] = len;
        hs.push(e1.clone());
        e1[0] = -len;
        hs.push(e1);
        if j > 1 {
            hs.push(vec![len / jf.sqrt(); j]);
        }
    }

    let max_sd = vars.iter().cloned().fold(0.0, f64::max).sqrt();
    let du = 0.025 / (max_sd * block.sqrt());
    let mut cache: HashMap<(usize, u64), Profile> = HashMap::new();
    let mut points = Vec::with_capacity(hs.len());
    let mut diverged = Vec::new();
    for h in &hs {
        let (factors, jacobian) = factors_for(h, d, n);
        let mut totals = Vec::with_capacity(factors.len());
        let mut cumulative = Vec::with_capacity(factors.len());
        for f in &factors {
            let key = (f.coord, f.tilt.to_bits());
            let prof = match cache.entry(key) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => e.insert(profile(family, f, du, setup.points_per_sd)?),
            };
            let g: Vec<f64> = prof.values.iter().map(|v| v.powi(f.power as i32)).collect();
            if *g.last().unwrap() > 1e-12 {
                diverged.push(format!("h={h:?}: |CF|^{} = {:.2e} at the resolution limit", f.power, g.last().unwrap()));
            }
            let mut c = Vec::with_capacity(g.len());
            let mut acc = 0.0;
            c.push(0.0);
            for k in 1..g.len() {
                acc += du * (g[k - 1] + g[k]);
                c.push(acc);
            }
            totals.push(acc);
            cumulative.push(c);
        }
        let total: f64 = totals.iter().product();
        let reach: f64 = factors
            .iter()
            .zip(&cumulative)
            .map(|(f, c)| f.weight * (du * (c.len() - 1) as f64).powi(2))
            .sum();
        let inner = if r0 * r0 >= reach {
            total
        } else {
            inner_mass(&factors, &cumulative, du, r0 * r0, setup.bins)
        };
        let integral = jacobian * (total - inner).max(0.0);
        let hn = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        points.push(ProbePoint::new(
            format!("{label},h={}", fmt_vec(h)),
            hn * tau,
            integral,
            bound,
            0.0,
        ));
    }
    let mut r = ProbeReport::from_points("smoothness", points)
        .fit("r0", r0)
        .fit("sigma", sigma)
        .fit("sqrt_det_d", det_sqrt);
    for msg in diverged {
        r = r.fail(format!("integral not convergent on grid: {msg}"));
    }
    Ok(r)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", parts.join(";"))
}

/// One-dimensional factors of `|F_h(t)|` and the Jacobian of the rotation.
fn factors_for(h: &[f64], d: usize, n: u32) -> (Vec<Factor>, f64) {
    let j = h.len();
    let paired = j.saturating_sub(d);
    let mut out = Vec::new();
    let mut jac = 1.0;
    for c in 0..paired {
        let (a, b) = (h[c], h[d + c]);
        for tilt in [a + b, a - b] {
            out.push(Factor { coord: c, tilt, power: 1 << (n - 1), weight: 0.5 });
        }
        jac *= 0.5;
    }
    for (c, &hc) in h.iter().enumerate().take(j.min(d)).skip(paired) {
        out.push(Factor { coord: c, tilt: hc, power: 1 << n, weight: 1.0 });
    }
    (out, jac)
}

fn profile(family: &ProductFamily, f: &Factor, du: f64, pps: f64) -> Result<Profile> {
    let (_, p) = conjugate_parts(&family.coords[f.coord], f.tilt, pps)?;
    let cf = TiltedCf::new(&p, 0.0);
    let u_max = cf.max_resolved_t();
    let mut values = vec![1.0];
    let mut quiet = 0;
    let mut k = 1;
    loop {
        let u = k as f64 * du;
        if u > u_max {
            break;
        }
        let v = cf.abs(u).value;
        values.push(v);
        // stop once even |CF|^1 has stayed negligible for a while
        quiet = if v < 1e-22 { quiet + 1 } else { 0 };
        if quiet > 64 {
            break;
        }
        k += 1;
    }
    Ok(Profile { values })
}

/// Mass of the product measure inside `sum_k weight_k u_k^2 < s_max`.
fn inner_mass(factors: &[Factor], cumulative: &[Vec<f64>], du: f64, s_max: f64, bins: usize) -> f64 {
    let ds = s_max / bins as f64;
    let mut acc: Option<Vec<f64>> = None;
    for (f, c) in factors.iter().zip(cumulative) {
        let at = |s: f64| -> f64 {
            let u = (s / f.weight).sqrt() / du;
            let i = u.floor() as usize;
            if i + 1 >= c.len() {
                return *c.last().unwrap();
            }
            let frac = u - i as f64;
            c[i] + frac * (c[i + 1] - c[i])
        };
        let mass: Vec<f64> = (0..bins).map(|i| at((i + 1) as f64 * ds) - at(i as f64 * ds)).collect();
        acc = Some(match acc {
            None => mass,
            Some(prev) => {
                let mut out = vec![0.0; bins];
                for (a, &pa) in prev.iter().enumerate() {
                    if pa == 0.0 {
                        continue;
                    }
                    for (b, &mb) in mass.iter().enumerate().take(bins - a) {
                        out[a + b] += pa * mb;
                    }
                }
                out
            }
        });
    }
    let conv = acc.unwrap_or_default();
    // each bin's mass sits at its midpoint, so k factors shift the sum by k/2 bins
    let limit = (bins as f64 - 0.5 * factors.len() as f64).ceil().max(0.0) as usize;
    conv.iter().take(limit).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::FamilySpec1D;
    use statrs::function::gamma::gamma_ur;

    /// `int_{|t| >= r} exp(-c |t|^2) dt` over `R^j`.
    fn gaussian_exterior(c: f64, r: f64, j: usize) -> f64 {
        let jf = j as f64;
        (PI / c).powf(0.5 * jf) * gamma_ur(0.5 * jf, c * r * r)
    }

    #[test]
    fn gaussian_block_matches_radial_oracle() {
        let fam = ProductFamily::iid(FamilySpec1D::standard_gaussian(), 2).unwrap();
        for (n, j, tau) in [(1, 1, 0.3), (2, 2, 0.1), (1, 3, 0.1), (3, 4, 0.05), (1, 4, 0.2)] {
            let setup = SmoothnessSetup { level: n, j, ..Default::default() };
            let r = check_smoothness_integrals(&fam, tau, &setup).unwrap();
            let r0 = 1.0 / (4.0 * tau * j as f64);
            // |F_h(t)| = exp(-2^n |t|^2 / 2) for every h
            let exact = gaussian_exterior((1u64 << n) as f64 / 2.0, r0, j);
            for p in &r.points {
                assert!(
                    (p.empirical - exact).abs() <= 2e-3 * exact + 1e-12,
                    "n={n} j={j}: {} vs {exact}",
                    p.empirical
                );
            }
            let sigma = ((1u64 << n) as f64).sqrt();
            let bound = (2.0 * PI).powf(j as f64 / 2.0) * tau * (j as f64).powf(1.5)
                / (sigma * sigma.powi(j as i32));
            assert!((r.points[0].bound - bound).abs() < 1e-12 * bound);
        }
    }

    #[test]
    fn small_tau_gaussian_block_passes() {
        let fam = ProductFamily::iid(FamilySpec1D::standard_gaussian(), 1).unwrap();
        for j in [1, 2] {
            let setup = SmoothnessSetup { level: 3, j, ..Default::default() };
            let r = check_smoothness_integrals(&fam, 0.05, &setup).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn zero_tau_is_vacuous() {
        let fam = ProductFamily::iid(FamilySpec1D::poly_gaussian(0.5, 1), 1).unwrap();
        let r = check_smoothness_integrals(&fam, 0.0, &SmoothnessSetup::default()).unwrap();
        assert!(r.pass);
        assert_eq!(r.points[0].empirical, 0.0);
    }

    #[test]
    fn tilted_paired_factors() {
        // for Gaussian coordinates the tilt does not change |CF|, paired or not
        let fam = ProductFamily::iid(FamilySpec1D::standard_gaussian(), 1).unwrap();
        let setup = SmoothnessSetup { level: 2, j: 2, ..Default::default() };
        let r = check_smoothness_integrals(&fam, 0.15, &setup).unwrap();
        let first = r.points[0].empirical;
        assert!(r.points.iter().all(|p| (p.empirical - first).abs() < 1e-6 * first));
    }

    #[test]
    fn bad_dimension() {
        let fam = ProductFamily::iid(FamilySpec1D::standard_gaussian(), 1).unwrap();
        let setup = SmoothnessSetup { j: 3, ..Default::default() };
        assert!(check_smoothness_integrals(&fam, 0.1, &setup).is_err());
    }
}
