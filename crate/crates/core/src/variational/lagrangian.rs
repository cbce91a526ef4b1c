use std::fmt::Debug;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Partial derivatives of `L(t, q, v, w)` with respect to `q`, `v` and `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partials {
    pub dq: Vec<f64>,
    pub dv: Vec<f64>,
    pub dw: Vec<f64>,
}

/// A Lagrangian `L(t, q, v, w)` where `v` stands for the classical velocity
/// and `w` for the left Caputo derivative of `q`.
pub trait Lagrangian: Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, t: f64, q: &[f64], v: &[f64], w: &[f64]) -> f64;

    /// Analytic partials. Returning `None` selects central finite differences.
    fn partials(&self, _t: f64, _q: &[f64], _v: &[f64], _w: &[f64]) -> Option<Partials> {
        None
    }

    /// True when `L` does not depend on `t` explicitly.
    fn is_autonomous(&self) -> bool {
        false
    }
}

const PROBES: usize = 16;
const PARTIALS_RTOL: f64 = 1e-5;

/// Validated, shareable handle on a [`Lagrangian`].
#[derive(Debug, Clone)]
pub struct LagrangianSpec {
    inner: Arc<dyn Lagrangian>,
}

impl LagrangianSpec {
    /// Wraps `l`, checking analytic partials (when supplied) against finite
    /// differences of `value` on deterministic random probes.
    pub fn new(l: impl Lagrangian + 'static) -> Result<Self> {
        Self::from_arc(Arc::new(l))
    }

    pub fn from_arc(inner: Arc<dyn Lagrangian>) -> Result<Self> {
        if inner.dim() == 0 {
            return Err(Error::InvalidArgument("Lagrangian dimension must be positive".into()));
        }
        let spec = LagrangianSpec { inner };
        spec.validate_partials()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn is_autonomous(&self) -> bool {
        self.inner.is_autonomous()
    }

    pub fn value(&self, t: f64, q: &[f64], v: &[f64], w: &[f64]) -> f64 {
        self.inner.value(t, q, v, w)
    }

    pub fn has_analytic_partials(&self) -> bool {
        let z = vec![0.0; self.dim()];
        self.inner.partials(0.0, &z, &z, &z).is_some()
    }

    pub fn partials(&self, t: f64, q: &[f64], v: &[f64], w: &[f64]) -> Partials {
        self.inner
            .partials(t, q, v, w)
            .unwrap_or_else(|| self.finite_difference_partials(t, q, v, w))
    }

    /// Central differences with step `1e-6 (1 + |x|)`.
    pub fn finite_difference_partials(&self, t: f64, q: &[f64], v: &[f64], w: &[f64]) -> Partials {
        let d = self.dim();
        let mut args = [q.to_vec(), v.to_vec(), w.to_vec()];
        let mut out = [vec![0.0; d], vec![0.0; d], vec![0.0; d]];
        for slot in 0..3 {
            for k in 0..d {
                let x = args[slot][k];
                let step = 1e-6 * (1.0 + x.abs());
                args[slot][k] = x + step;
                let up = self.inner.value(t, &args[0], &args[1], &args[2]);
                args[slot][k] = x - step;
                let down = self.inner.value(t, &args[0], &args[1], &args[2]);
                args[slot][k] = x;
                out[slot][k] = (up - down) / (2.0 * step);
            }
        }
        let [dq, dv, dw] = out;
        Partials { dq, dv, dw }
    }

    fn validate_partials(&self) -> Result<()> {
        if !self.has_analytic_partials() {
            return Ok(());
        }
        let d = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..PROBES {
            let t = rng.gen_range(0.0..1.0);
            let mut draw = || (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
            let (q, v, w) = (draw(), draw(), draw());
            let analytic = self.inner.partials(t, &q, &v, &w).expect("checked above");
            let fd = self.finite_difference_partials(t, &q, &v, &w);
            for (name, a, b) in [("dq", &analytic.dq, &fd.dq), ("dv", &analytic.dv, &fd.dv), ("dw", &analytic.dw, &fd.dw)] {
                if a.len() != d {
                    return Err(Error::DimensionMismatch(format!("{name} has {} components, expected {d}", a.len())));
                }
                for k in 0..d {
                    if (a[k] - b[k]).abs() > PARTIALS_RTOL * a[k].abs().max(1.0) {
                        return Err(Error::PartialsMismatch(format!(
                            "{name}[{k}] = {} but finite differences give {} at t={t}, q={q:?}, v={v:?}, w={w:?}",
                            a[k], b[k]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn scaled(c: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| c * x).collect()
}

/// Free particle, `L = m |v|² / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Free {
    pub dim: usize,
    pub mass: f64,
}

impl Lagrangian for Free {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _t: f64, _q: &[f64], v: &[f64], _w: &[f64]) -> f64 {
        0.5 * self.mass * dot(v, v)
    }
    fn partials(&self, _t: f64, _q: &[f64], v: &[f64], _w: &[f64]) -> Option<Partials> {
        Some(Partials { dq: vec![0.0; self.dim], dv: scaled(self.mass, v), dw: vec![0.0; self.dim] })
    }
    fn is_autonomous(&self) -> bool {
        true
    }
}

/// Harmonic oscillator, `L = m |v|² / 2 - k |q|² / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Harmonic {
    pub dim: usize,
    pub mass: f64,
    pub stiffness: f64,
}

impl Lagrangian for Harmonic {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _t: f64, q: &[f64], v: &[f64], _w: &[f64]) -> f64 {
        0.5 * self.mass * dot(v, v) - 0.5 * self.stiffness * dot(q, q)
    }
    fn partials(&self, _t: f64, q: &[f64], v: &[f64], _w: &[f64]) -> Option<Partials> {
        Some(Partials {
            dq: scaled(-self.stiffness, q),
            dv: scaled(self.mass, v),
            dw: vec![0.0; self.dim],
        })
    }
    fn is_autonomous(&self) -> bool {
        true
    }
}

/// Polynomial `c_0 + c_1 x + c_2 x² + ...`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Polynomial { coeffs }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c)
    }
}

/// `L = m |v|² / 2 - Σ_k U(q_k) + γ |w|² / 2` with polynomial `U`.
///
/// With `dim = 1` this is the fractional linear-friction Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPolynomial {
    pub dim: usize,
    pub mass: f64,
    pub gamma: f64,
    pub potential: Polynomial,
}

impl Lagrangian for PotentialPolynomial {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _t: f64, q: &[f64], v: &[f64], w: &[f64]) -> f64 {
        let u: f64 = q.iter().map(|&x| self.potential.eval(x)).sum();
        0.5 * self.mass * dot(v, v) - u + 0.5 * self.gamma * dot(w, w)
    }
    fn partials(&self, _t: f64, q: &[f64], v: &[f64], w: &[f64]) -> Option<Partials> {
        Some(Partials {
            dq: q.iter().map(|&x| -self.potential.derivative(x)).collect(),
            dv: scaled(self.mass, v),
            dw: scaled(self.gamma, w),
        })
    }
    fn is_autonomous(&self) -> bool {
        true
    }
}

/// General quadratic Lagrangian with scalar coefficients:
///
/// ```text
/// L = ½ qq |q|² + ½ vv |v|² + ½ ww |w|² + qv q·v + qw q·w + vw v·w
///     + (q + tq t) Σq + v Σv + w Σw
/// ```
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuadraticForm {
    pub dim: usize,
    pub qq: f64,
    pub vv: f64,
    pub ww: f64,
    pub qv: f64,
    pub qw: f64,
    pub vw: f64,
    pub q: f64,
    pub v: f64,
    pub w: f64,
    pub tq: f64,
}

impl Lagrangian for QuadraticForm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, t: f64, q: &[f64], v: &[f64], w: &[f64]) -> f64 {
        let sum = |x: &[f64]| x.iter().sum::<f64>();
        0.5 * self.qq * dot(q, q)
            + 0.5 * self.vv * dot(v, v)
            + 0.5 * self.ww * dot(w, w)
            + self.qv * dot(q, v)
            + self.qw * dot(q, w)
            + self.vw * dot(v, w)
            + (self.q + self.tq * t) * sum(q)
            + self.v * sum(v)
            + self.w * sum(w)
    }
    fn partials(&self, t: f64, q: &[f64], v: &[f64], w: &[f64]) -> Option<Partials> {
        let d = self.dim;
        let mut p = Partials { dq: vec![0.0; d], dv: vec![0.0; d], dw: vec![0.0; d] };
        for k in 0..d {
            p.dq[k] = self.qq * q[k] + self.qv * v[k] + self.qw * w[k] + self.q + self.tq * t;
            p.dv[k] = self.vv * v[k] + self.qv * q[k] + self.vw * w[k] + self.v;
            p.dw[k] = self.ww * w[k] + self.qw * q[k] + self.vw * v[k] + self.w;
        }
        Some(p)
    }
    fn is_autonomous(&self) -> bool {
        self.tq == 0.0
    }
}
