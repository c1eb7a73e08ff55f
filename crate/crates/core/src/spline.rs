//! Periodic cubic interpolating spline, used only for its node slopes.

/// Slopes `s′(x_i)` of the periodic cubic spline through `(x_i, y_i)`.
///
/// `x` must be strictly increasing with `x[n-1] < x[0] + period`.
pub fn periodic_slopes(x: &[f64], y: &[f64], period: f64) -> Vec<f64> {
    let n = x.len();
    assert_eq!(n, y.len());
    assert!(n >= 3, "periodic spline needs at least three nodes");
    let h: Vec<f64> = (0..n)
        .map(|i| {
            if i + 1 < n {
                x[i + 1] - x[i]
            } else {
                x[0] + period - x[n - 1]
            }
        })
        .collect();
    let slope: Vec<f64> = (0..n).map(|i| (y[(i + 1) % n] - y[i]) / h[i]).collect();

    // h_{i-1} M_{i-1} + 2(h_{i-1} + h_i) M_i + h_i M_{i+1} = 6 (slope_i − slope_{i-1})
    let prev = |i: usize| (i + n - 1) % n;
    let sub: Vec<f64> = (0..n).map(|i| h[prev(i)]).collect();
    let diag: Vec<f64> = (0..n).map(|i| 2.0 * (h[prev(i)] + h[i])).collect();
    let sup: Vec<f64> = h.clone();
    let rhs: Vec<f64> = (0..n).map(|i| 6.0 * (slope[i] - slope[prev(i)])).collect();
    let m = solve_cyclic(&sub, &diag, &sup, &rhs);

    (0..n)
        .map(|i| slope[i] - h[i] * (2.0 * m[i] + m[(i + 1) % n]) / 6.0)
        .collect()
}

/// Cyclic tridiagonal solve (Sherman-Morrison on top of Thomas).
/// `sub[0]` couples row 0 to the last unknown, `sup[n-1]` the last row to the first.
fn solve_cyclic(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= alpha * beta / gamma;
    let x = thomas(sub, &b, sup, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(sub, &b, sup, &u);
    let factor = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - factor * zi).collect()
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn recovers_derivative_of_smooth_periodic_function() {
        let n = 400;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let u = i as f64 / n as f64;
                2.0 * PI * u + 0.3 * (2.0 * PI * u).sin()
            })
            .collect();
        let y: Vec<f64> = x.iter().map(|&t| (3.0 * t).cos() + 0.5 * t.sin()).collect();
        let s = periodic_slopes(&x, &y, 2.0 * PI);
        for (t, si) in x.iter().zip(&s) {
            let exact = -3.0 * (3.0 * t).sin() + 0.5 * t.cos();
            assert!((si - exact).abs() < 1e-5, "{si} vs {exact}");
        }
    }

    #[test]
    fn constant_data_has_zero_slope() {
        let x: Vec<f64> = (0..10)
            .map(|i| i as f64 * 0.5 + 0.01 * (i * i) as f64)
            .collect();
        let s = periodic_slopes(&x, &[2.0; 10], 6.0);
        assert!(s.iter().all(|v| v.abs() < 1e-13));
    }
}
