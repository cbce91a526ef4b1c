//! Classical finite differences and trapezoidal quadrature on uniform samples.

/// Second-order first derivative by central differences. At the ends the
/// missing neighbour is a cubically extrapolated ghost node (when four
/// samples exist), so the end values carry the same leading error as the
/// interior and a second application stays second order next to the ends.
/// Needs at least three samples.
pub fn central_diff(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 3, "central_diff needs at least 3 samples");
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    if n >= 4 {
        d[0] = (-4.0 * f[0] + 7.0 * f[1] - 4.0 * f[2] + f[3]) / (2.0 * h);
        d[n - 1] = (4.0 * f[n - 1] - 7.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / (2.0 * h);
    } else {
        d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
        d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    }
    d
}

/// `r`-fold iterated [`central_diff`], without smoothing.
pub fn iterated_diff(f: &[f64], h: f64, r: usize) -> Vec<f64> {
    let mut d = f.to_vec();
    for _ in 0..r {
        d = central_diff(&d, h);
    }
    d
}

/// Composite trapezoid rule. Non-finite (flagged) samples contribute zero.
pub fn trapezoid(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    let val = |x: f64| if x.is_finite() { x } else { 0.0 };
    let mut s = 0.5 * (val(f[0]) + val(f[n - 1]));
    for &x in &f[1..n - 1] {
        s += val(x);
    }
    s * h
}
