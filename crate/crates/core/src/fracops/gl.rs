//! Grünwald-Letnikov differences.
//!
//! A first-order backend with the same signatures as the L1 operators. It
//! shares no weights with them, which makes it a useful cross-check for
//! kernel-weight mistakes; the crate itself never uses it for results.

use super::{reversed, FractionalOrder};
use crate::error::Result;
use crate::grid::GridFunction;

fn gl_weights(n: usize, alpha: f64) -> Vec<f64> {
    let mut w = Vec::with_capacity(n);
    w.push(1.0);
    for j in 1..n {
        let prev = w[j - 1];
        w.push(prev * (1.0 - (alpha + 1.0) / j as f64));
    }
    w
}

/// Left RL derivative by Grünwald-Letnikov sums; NaN at `t = a` unless
/// `f(a) = 0` or `α = 1`.
pub fn rl_derivative_left_slice(f: &[f64], h: f64, alpha: f64) -> Vec<f64> {
    let n = f.len();
    let w = gl_weights(n, alpha);
    let scale = h.powf(-alpha);
    let mut out = vec![0.0; n];
    for k in 1..n {
        let mut s = 0.0;
        for j in 0..=k {
            s += w[j] * f[k - j];
        }
        out[k] = scale * s;
    }
    if alpha < 1.0 && f[0] != 0.0 {
        out[0] = f64::NAN;
    }
    out
}

pub fn caputo_left_slice(f: &[f64], h: f64, alpha: f64) -> Vec<f64> {
    let shifted: Vec<f64> = f.iter().map(|v| v - f[0]).collect();
    rl_derivative_left_slice(&shifted, h, alpha)
}

pub fn caputo_right_slice(f: &[f64], h: f64, alpha: f64) -> Vec<f64> {
    reversed(&caputo_left_slice(&reversed(f), h, alpha))
}

pub fn rl_derivative_right_slice(f: &[f64], h: f64, alpha: f64) -> Vec<f64> {
    reversed(&rl_derivative_left_slice(&reversed(f), h, alpha))
}

pub fn caputo_left(f: &GridFunction, alpha: FractionalOrder) -> Result<GridFunction> {
    let alpha = alpha.check_derivative()?;
    super::per_component(f, |c, h| caputo_left_slice(c, h, alpha))
}

pub fn caputo_right(f: &GridFunction, alpha: FractionalOrder) -> Result<GridFunction> {
    let alpha = alpha.check_derivative()?;
    super::per_component(f, |c, h| caputo_right_slice(c, h, alpha))
}

pub fn rl_derivative_left(f: &GridFunction, alpha: FractionalOrder) -> Result<GridFunction> {
    let alpha = alpha.check_derivative()?;
    super::per_component(f, |c, h| rl_derivative_left_slice(c, h, alpha))
}

pub fn rl_derivative_right(f: &GridFunction, alpha: FractionalOrder) -> Result<GridFunction> {
    let alpha = alpha.check_derivative()?;
    super::per_component(f, |c, h| rl_derivative_right_slice(c, h, alpha))
}
