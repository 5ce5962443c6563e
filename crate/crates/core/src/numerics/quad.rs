//! Uniform-step quadrature helpers.

pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    trapezoid_fn(values.len(), step, |i| values[i])
}

pub fn trapezoid_fn(n: usize, step: f64, f: impl Fn(usize) -> f64) -> f64 {
    match n {
        0 | 1 => 0.0,
        _ => {
            let inner: f64 = (1..n - 1).map(&f).sum();
            step * (inner + 0.5 * (f(0) + f(n - 1)))
        }
    }
}

/// Integrals of the tabulated function over each cell `[x_i, x_{i+1}]`.
///
/// Interior cells use the quintic through six neighbouring nodes (sixth order
/// in the cumulative sum); the two cells at each end fall back to the cubic
/// through four nodes and the quadratic through three. Negative cell
/// integrals, which only arise from round-off or kinks in the data, are
/// clamped to zero so that cumulative sums are monotone.
pub fn cell_integrals_into(g: &[f64], step: f64, out: &mut Vec<f64>) {
    out.clear();
    let n = g.len();
    if n < 2 {
        return;
    }
    if n < 4 {
        out.extend((0..n - 1).map(|i| 0.5 * step * (g[i] + g[i + 1])));
        return;
    }
    let quadratic = |a: f64, b: f64, c: f64| step / 12.0 * (5.0 * a + 8.0 * b - c);
    let cubic = |i: usize| step / 24.0 * (13.0 * (g[i] + g[i + 1]) - g[i - 1] - g[i + 2]);
    let c6 = step / 1440.0;
    out.push(quadratic(g[0], g[1], g[2]).max(0.0));
    for i in 1..n - 2 {
        let v = if i >= 2 && i + 3 < n {
            c6 * (802.0 * (g[i] + g[i + 1]) - 93.0 * (g[i - 1] + g[i + 2]) + 11.0 * (g[i - 2] + g[i + 3]))
        } else {
            cubic(i)
        };
        out.push(v.max(0.0));
    }
    out.push(quadratic(g[n - 1], g[n - 2], g[n - 3]).max(0.0));
}

pub fn cell_integrals(g: &[f64], step: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(g.len());
    cell_integrals_into(g, step, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let v: Vec<f64> = (0..11).map(|i| 2.0 * i as f64 * 0.1 + 1.0).collect();
        assert!((trapezoid(&v, 0.1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cumulative_cell_rule_is_sixth_order() {
        // cumulative integral of the standard normal density on [-10, 10]
        let err = |h: f64| {
            let n = (20.0 / h).round() as usize + 1;
            let x = |i: usize| -10.0 + i as f64 * h;
            let g: Vec<f64> = (0..n).map(|i| (-0.5 * x(i) * x(i)).exp()).collect();
            let cells = cell_integrals(&g, h);
            let root = (2.0 * std::f64::consts::PI).sqrt();
            let mut acc = 0.0;
            let mut worst = 0.0f64;
            for (i, c) in cells.iter().enumerate() {
                acc += c / root;
                let exact = 0.5 * libm::erfc(-x(i + 1) / std::f64::consts::SQRT_2);
                worst = worst.max((acc - exact).abs());
            }
            worst
        };
        let e1 = err(0.2);
        let e2 = err(0.1);
        assert!(e1 < 1e-6, "{e1}");
        assert!(e1 / e2 > 40.0, "{e1} {e2}");
    }
}
