//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Gamma by the Stirling series at x + 20 and downward recurrence.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let z = x + 20.0;
    let z2 = z * z;
    let series = 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2) + 1.0 / (1260.0 * z * z2 * z2) - 1.0 / (1680.0 * z * z2 * z2 * z2);
    let ln = (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series;
    let prod: f64 = (0..20).map(|k| x + k as f64).product();
    ln.exp() / prod
}

/// Composite Simpson rule with `m` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, m: usize) -> f64 {
    let h = (hi - lo) / m as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..m {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

const PANELS: usize = 4000;

/// `(1/Γ(β)) ∫_a^t (t-θ)^{β-1} f(θ) dθ`; for `β < 1` through `s = (t-θ)^β`.
pub fn rl_integral_left(f: impl Fn(f64) -> f64, a: f64, t: f64, beta: f64) -> f64 {
    if t <= a {
        return 0.0;
    }
    if beta < 1.0 {
        let top = (t - a).powf(beta);
        simpson(|s| f(t - s.powf(1.0 / beta)), 0.0, top, PANELS) / gamma(beta + 1.0)
    } else {
        simpson(|th| (t - th).powf(beta - 1.0) * f(th), a, t, PANELS) / gamma(beta)
    }
}

/// `(1/Γ(β)) ∫_t^b (θ-t)^{β-1} f(θ) dθ`.
pub fn rl_integral_right(f: impl Fn(f64) -> f64, t: f64, b: f64, beta: f64) -> f64 {
    if t >= b {
        return 0.0;
    }
    if beta < 1.0 {
        let top = (b - t).powf(beta);
        simpson(|s| f(t + s.powf(1.0 / beta)), 0.0, top, PANELS) / gamma(beta + 1.0)
    } else {
        simpson(|th| (th - t).powf(beta - 1.0) * f(th), t, b, PANELS) / gamma(beta)
    }
}

/// Left Caputo derivative from the derivative `df`.
pub fn caputo_left(df: impl Fn(f64) -> f64, a: f64, t: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        return df(t);
    }
    rl_integral_left(df, a, t, 1.0 - alpha)
}

/// Right Caputo derivative from the derivative `df`.
pub fn caputo_right(df: impl Fn(f64) -> f64, t: f64, b: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        return -df(t);
    }
    -rl_integral_right(df, t, b, 1.0 - alpha)
}

/// Least-squares slope of `log err` against `log n`, negated.
pub fn observed_order(ns: &[usize], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    -num / den
}

/// Max over nodes `i` with `lo <= t_i <= hi` of `|values[i] - exact(t_i)|`.
pub fn max_error_on(nodes: &[f64], values: &[f64], exact: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    nodes
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, v)| (v - exact(*t)).abs())
        .fold(0.0, f64::max)
}
