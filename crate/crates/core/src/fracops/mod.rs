//! Riemann-Liouville and Caputo operators on uniform grids.
//!
//! * RL integrals use product trapezoidal quadrature: the kernel
//!   `(t - θ)^(β-1)` is integrated exactly against the piecewise-linear
//!   interpolant of `f`.
//! * Caputo derivatives use the L1 scheme (same interpolant, derivative
//!   inside the integral), which is exact on linear functions and converges
//!   at order `2 - α` on smooth data. At `α = 1` the classical derivative is
//!   returned (central differences, one-sided at the ends).
//! * RL derivatives are the Caputo derivative plus the singular shift term
//!   `f(a) (t - a)^(-α) / Γ(1 - α)`; the base-point node is flagged (NaN)
//!   when that term is infinite.
//!
//! Right-sided operators are computed by reflecting `t -> a + b - t`.
//! All loops sum in a fixed order, so results are reproducible bit for bit.

pub mod gl;

use crate::calculus::{central_diff, trapezoid};
use crate::error::{Error, Result};
use crate::gamma::{gamma, recip_gamma};
use crate::grid::GridFunction;

/// Order of a fractional operator.
///
/// Derivatives accept `0 < α ≤ 1`; integrals accept any `α > 0` (the
/// transfer series needs orders up to `R + 1 - α`). The value is stored as
/// given, without snapping to 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn integral(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidOrder { alpha: beta, allowed: "(0, inf) for integrals" });
        }
        Ok(FractionalOrder(beta))
    }

    pub fn derivative(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidOrder { alpha, allowed: "(0, 1] for derivatives" });
        }
        Ok(FractionalOrder(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_classical(self) -> bool {
        self.0 == 1.0
    }

    fn check_derivative(self) -> Result<f64> {
        Self::derivative(self.0).map(|o| o.0)
    }
}

fn reject_flagged(f: &GridFunction, what: &str) -> Result<()> {
    match f.first_flagged() {
        Some(i) => Err(Error::NonFinite { what: what.into(), index: i }),
        None => Ok(()),
    }
}

fn reversed(v: &[f64]) -> Vec<f64> {
    v.iter().rev().copied().collect()
}

/// Left RL integral of order `beta > 0` on uniformly spaced samples.
/// `beta == 0` is accepted here and returns the samples unchanged.
pub fn rl_integral_left_slice(f: &[f64], h: f64, beta: f64) -> Vec<f64> {
    let n = f.len();
    if beta == 0.0 {
        return f.to_vec();
    }
    // p[k] = k^(beta+1)
    let p: Vec<f64> = (0..n + 1).map(|k| (k as f64).powf(beta + 1.0)).collect();
    // interior weights depend only on m = k - j
    let w: Vec<f64> = (0..n)
        .map(|m| if m == 0 { 1.0 } else { p[m + 1] - 2.0 * p[m] + p[m - 1] })
        .collect();
    let scale = h.powf(beta) / gamma(beta + 2.0);
    let mut out = vec![0.0; n];
    for k in 1..n {
        let kf = k as f64;
        let a0 = p[k - 1] - (kf - 1.0 - beta) * kf.powf(beta);
        let mut s = a0 * f[0];
        for j in 1..k {
            s += w[k - j] * f[j];
        }
        s += f[k];
        out[k] = scale * s;
    }
    out
}

pub fn rl_integral_right_slice(f: &[f64], h: f64, beta: f64) -> Vec<f64> {
    reversed(&rl_integral_left_slice(&reversed(f), h, beta))
}

/// L1 weights `b_m = (m+1)^(1-α) - m^(1-α)`.
fn l1_weights(n: usize, alpha: f64) -> Vec<f64> {
    let e = 1.0 - alpha;
    (0..n).map(|m| ((m + 1) as f64).powf(e) - (m as f64).powf(e)).collect()
}

/// Left Caputo derivative, `0 < α ≤ 1`, on uniformly spaced samples.
pub fn caputo_left_slice(f: &[f64], h: f64, alpha: f64) -> Vec<f64> {
    if alpha == 1.0 {
        return central_diff(f, h);
    }
    let n = f.len();
    let b = l1_weights(n, alpha);
    let scale = h.powf(-alpha) / gamma(2.0 - alpha);
    let mut out = vec![0.0; n];
    for k in 1..n {
        let mut s = 0.0;
        for j in 1..=k {
            s += b[k - j] * (f[j] - f[j - 1]);
        }
        out[k] = scale * s;
    }
    out
}

pub fn caputo_right_slice(f: &[f64], h: f64, alpha: f64) -> Vec<f64> {
    reversed(&caputo_left_slice(&reversed(f), h, alpha))
}

/// Left RL derivative via the Caputo relation; NaN at `t = a` when the
/// shift term is singular.
pub fn rl_derivative_left_slice(f: &[f64], h: f64, alpha: f64) -> Vec<f64> {
    let mut out = caputo_left_slice(f, h, alpha);
    let c = recip_gamma(1.0 - alpha);
    if c == 0.0 || f[0] == 0.0 {
        return out;
    }
    out[0] = f64::NAN;
    for (k, o) in out.iter_mut().enumerate().skip(1) {
        *o += f[0] * c * (k as f64 * h).powf(-alpha);
    }
    out
}

pub fn rl_derivative_right_slice(f: &[f64], h: f64, alpha: f64) -> Vec<f64> {
    reversed(&rl_derivative_left_slice(&reversed(f), h, alpha))
}

fn per_component(
    f: &GridFunction,
    op: impl Fn(&[f64], f64) -> Vec<f64>,
) -> Result<GridFunction> {
    let h = f.grid().step();
    let cols: Vec<Vec<f64>> = f.columns().iter().map(|c| op(c, h)).collect();
    GridFunction::from_columns(*f.grid(), &cols)
}

/// `(1/Γ(β)) ∫_a^t (t-θ)^(β-1) f(θ) dθ` at every node.
pub fn rl_integral_left(f: &GridFunction, beta: FractionalOrder) -> Result<GridFunction> {
    let beta = FractionalOrder::integral(beta.value())?.value();
    reject_flagged(f, "rl_integral_left input")?;
    per_component(f, |c, h| rl_integral_left_slice(c, h, beta))
}

/// `(1/Γ(β)) ∫_t^b (θ-t)^(β-1) f(θ) dθ` at every node.
pub fn rl_integral_right(f: &GridFunction, beta: FractionalOrder) -> Result<GridFunction> {
    let beta = FractionalOrder::integral(beta.value())?.value();
    reject_flagged(f, "rl_integral_right input")?;
    per_component(f, |c, h| rl_integral_right_slice(c, h, beta))
}

pub fn caputo_left(f: &GridFunction, alpha: FractionalOrder) -> Result<GridFunction> {
    let alpha = alpha.check_derivative()?;
    reject_flagged(f, "caputo_left input")?;
    per_component(f, |c, h| caputo_left_slice(c, h, alpha))
}

/// Right Caputo derivative `I_b^(1-α) (-d/dt) f`; equals `-f'` at `α = 1`.
pub fn caputo_right(f: &GridFunction, alpha: FractionalOrder) -> Result<GridFunction> {
    let alpha = alpha.check_derivative()?;
    reject_flagged(f, "caputo_right input")?;
    per_component(f, |c, h| caputo_right_slice(c, h, alpha))
}

pub fn rl_derivative_left(f: &GridFunction, alpha: FractionalOrder) -> Result<GridFunction> {
    let alpha = alpha.check_derivative()?;
    reject_flagged(f, "rl_derivative_left input")?;
    per_component(f, |c, h| rl_derivative_left_slice(c, h, alpha))
}

pub fn rl_derivative_right(f: &GridFunction, alpha: FractionalOrder) -> Result<GridFunction> {
    let alpha = alpha.check_derivative()?;
    reject_flagged(f, "rl_derivative_right input")?;
    per_component(f, |c, h| rl_derivative_right_slice(c, h, alpha))
}

/// `|∫ g · C_a D^α f dt - ∫ f · RL_b D^α g dt|` by the trapezoid rule,
/// summed over components. `f` must vanish at both ends up to round-off
/// (`1e-12` relative to its max-norm).
pub fn ibp_residual(f: &GridFunction, g: &GridFunction, alpha: FractionalOrder) -> Result<f64> {
    f.check_compatible(g)?;
    let alpha = alpha.check_derivative()?;
    let last = f.len() - 1;
    let zero = 1e-12 * (1.0 + f.max_norm());
    if f.row(0).iter().chain(f.row(last)).any(|&v| v.abs() > zero) {
        return Err(Error::Boundary("ibp_residual needs f(a) = f(b) = 0".into()));
    }
    reject_flagged(f, "ibp_residual f")?;
    reject_flagged(g, "ibp_residual g")?;
    let h = f.grid().step();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (fc, gc) in f.columns().iter().zip(g.columns()) {
        let cf = caputo_left_slice(fc, h, alpha);
        let rg = rl_derivative_right_slice(&gc, h, alpha);
        let left: Vec<f64> = gc.iter().zip(&cf).map(|(x, y)| x * y).collect();
        let right: Vec<f64> = fc.iter().zip(&rg).map(|(x, y)| x * y).collect();
        lhs += trapezoid(&left, h);
        rhs += trapezoid(&right, h);
    }
    Ok((lhs - rhs).abs())
}
