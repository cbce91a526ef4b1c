//! Symmetries, invariance checks and Noether quantities.
//!
//! A one-parameter group acts on time through `ψ₁(ε, t)` and on the state
//! through `ψ₂(ε, q)`; `τ = ∂ψ₁/∂ε` and `f₂ = ∂ψ₂/∂ε` at `ε = 0` enter the
//! conserved quantity
//!
//! ```text
//! C = f₂·∂₃L + Σ_{r=0}^{R} [ (-1)^r (∂₄L)^(r) · I_a^{r+1-α}(f₂ - f₂(a))
//!                            + f₂^(r) · I_b^{r+1-α}(∂₄L) ]
//!     + τ (L - q̇·∂₃L - α ∂₄L · C_a D^α q)
//! ```
//!
//! The infinite series is always truncated; [`InvariantSeries`] reports the
//! size of the last retained term so callers can judge the truncation.

use std::fmt::Debug;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{central_diff, iterated_diff, trapezoid};
use crate::error::{Error, Result};
use crate::fracops::{caputo_left_slice, rl_derivative_right_slice, rl_integral_left_slice, rl_integral_right_slice, FractionalOrder};
use crate::gamma::gamma;
use crate::grid::{write_table, GridFunction};
use crate::variational::VariationalProblem;

/// Largest series truncation order accepted.
pub const MAX_TRUNCATION: usize = 6;
/// Default series truncation order.
pub const DEFAULT_TRUNCATION: usize = 2;
/// ε used for the central ε-difference in [`invariance_defect`].
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// A one-parameter group of diffeomorphisms acting on `(t, q)`.
pub trait OneParameterGroup: Debug + Send + Sync {
    /// `ψ₁(ε, t)`.
    fn time_map(&self, eps: f64, t: f64) -> f64;
    /// `ψ₂(ε, q)`.
    fn state_map(&self, eps: f64, q: &[f64]) -> Vec<f64>;
    /// `τ(t) = ∂ψ₁/∂ε (0, t)`.
    fn tau(&self, t: f64) -> f64;
    /// `f₂(t, q) = ∂ψ₂/∂ε (0, q)`.
    fn f2(&self, t: f64, q: &[f64]) -> Vec<f64>;
}

/// `t ↦ t + ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeTranslation;

impl OneParameterGroup for TimeTranslation {
    fn time_map(&self, eps: f64, t: f64) -> f64 {
        t + eps
    }
    fn state_map(&self, _eps: f64, q: &[f64]) -> Vec<f64> {
        q.to_vec()
    }
    fn tau(&self, _t: f64) -> f64 {
        1.0
    }
    fn f2(&self, _t: f64, q: &[f64]) -> Vec<f64> {
        vec![0.0; q.len()]
    }
}

/// `q ↦ q + ε v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTranslation {
    pub direction: Vec<f64>,
}

impl OneParameterGroup for SpaceTranslation {
    fn time_map(&self, _eps: f64, t: f64) -> f64 {
        t
    }
    fn state_map(&self, eps: f64, q: &[f64]) -> Vec<f64> {
        q.iter().zip(&self.direction).map(|(x, v)| x + eps * v).collect()
    }
    fn tau(&self, _t: f64) -> f64 {
        0.0
    }
    fn f2(&self, _t: f64, _q: &[f64]) -> Vec<f64> {
        self.direction.clone()
    }
}

/// Planar rotation `q ↦ q e^{iεω}` with `q = (Re, Im)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub omega: f64,
}

impl OneParameterGroup for Rotation {
    fn time_map(&self, _eps: f64, t: f64) -> f64 {
        t
    }
    fn state_map(&self, eps: f64, q: &[f64]) -> Vec<f64> {
        let (s, c) = (eps * self.omega).sin_cos();
        vec![c * q[0] - s * q[1], s * q[0] + c * q[1]]
    }
    fn tau(&self, _t: f64) -> f64 {
        0.0
    }
    fn f2(&self, _t: f64, q: &[f64]) -> Vec<f64> {
        vec![-self.omega * q[1], self.omega * q[0]]
    }
}

/// A group validated for a given state dimension.
#[derive(Debug, Clone)]
pub struct SymmetryGroup {
    inner: Arc<dyn OneParameterGroup>,
    dim: usize,
}

impl SymmetryGroup {
    /// Checks on deterministic probes that `ψ(0, ·)` is the identity (1e-12),
    /// that `ψ(ε) ∘ ψ(ε') = ψ(ε + ε')` (1e-8), and that `τ`, `f₂` match
    /// central ε-differences (1e-6).
    pub fn new(group: impl OneParameterGroup + 'static, dim: usize) -> Result<Self> {
        Self::from_arc(Arc::new(group), dim)
    }

    pub fn from_arc(inner: Arc<dyn OneParameterGroup>, dim: usize) -> Result<Self> {
        let s = SymmetryGroup { inner, dim };
        s.validate()?;
        Ok(s)
    }

    pub fn time_translation(dim: usize) -> Result<Self> {
        Self::new(TimeTranslation, dim)
    }

    pub fn space_translation(direction: Vec<f64>) -> Result<Self> {
        let dim = direction.len();
        Self::new(SpaceTranslation { direction }, dim)
    }

    pub fn rotation(omega: f64) -> Result<Self> {
        Self::new(Rotation { omega }, 2)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time_map(&self, eps: f64, t: f64) -> f64 {
        self.inner.time_map(eps, t)
    }

    pub fn state_map(&self, eps: f64, q: &[f64]) -> Vec<f64> {
        self.inner.state_map(eps, q)
    }

    pub fn tau(&self, t: f64) -> f64 {
        self.inner.tau(t)
    }

    pub fn f2(&self, t: f64, q: &[f64]) -> Vec<f64> {
        self.inner.f2(t, q)
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSymmetry(msg));
        let mut rng = ChaCha8Rng::seed_from_u64(0x0e7e);
        let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol * (1.0 + b.abs());
        for _ in 0..16 {
            let t = rng.gen_range(-2.0..2.0);
            let q: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (e1, e2) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let q0 = self.state_map(0.0, &q);
            if q0.len() != self.dim {
                return fail(format!("state map returns {} components, expected {}", q0.len(), self.dim));
            }
            if !close(self.time_map(0.0, t), t, 1e-12) || q0.iter().zip(&q).any(|(a, b)| !close(*a, *b, 1e-12)) {
                return fail(format!("psi(0, .) is not the identity at t={t}, q={q:?}"));
            }
            let tt = self.time_map(e1, self.time_map(e2, t));
            let qq = self.state_map(e1, &self.state_map(e2, &q));
            let (ts, qs) = (self.time_map(e1 + e2, t), self.state_map(e1 + e2, &q));
            if !close(tt, ts, 1e-8) || qq.iter().zip(&qs).any(|(a, b)| !close(*a, *b, 1e-8)) {
                return fail(format!("group property fails for eps={e1}, eps'={e2}"));
            }
            let de = 1e-5;
            let tau_fd = (self.time_map(de, t) - self.time_map(-de, t)) / (2.0 * de);
            if !close(self.tau(t), tau_fd, 1e-6) {
                return fail(format!("tau({t}) = {} but the eps-difference gives {tau_fd}", self.tau(t)));
            }
            let (qp, qm) = (self.state_map(de, &q), self.state_map(-de, &q));
            let f2 = self.f2(t, &q);
            for k in 0..self.dim {
                let fd = (qp[k] - qm[k]) / (2.0 * de);
                if !close(f2[k], fd, 1e-6) {
                    return fail(format!("f2[{k}] = {} but the eps-difference gives {fd}", f2[k]));
                }
            }
        }
        Ok(())
    }

    /// `f₂(t_i, q_i)` along a trajectory.
    pub fn f2_along(&self, q: &GridFunction) -> Result<GridFunction> {
        self.check_dim(q.dim())?;
        let mut values = Vec::with_capacity(q.values().len());
        for i in 0..q.len() {
            values.extend(self.f2(q.grid().node(i), q.row(i)));
        }
        GridFunction::new(*q.grid(), q.dim(), values)
    }

    /// CSV `t,tau,f2` (components of `f2` suffixed when dim > 1) along `q`.
    pub fn write_generators_csv<W: Write>(&self, q: &GridFunction, w: W) -> Result<()> {
        let f2 = self.f2_along(q)?;
        let nodes = q.grid().nodes();
        let mut header = vec!["t".to_string(), "tau".to_string()];
        let mut cols = vec![nodes.clone(), nodes.iter().map(|&t| self.tau(t)).collect()];
        for k in 0..f2.dim() {
            header.push(if f2.dim() == 1 { "f2".into() } else { format!("f2_{k}") });
            cols.push(f2.component(k));
        }
        write_table(w, &header, &cols)
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim {
            return Err(Error::DimensionMismatch(format!("symmetry acts on dim {}, trajectory has dim {d}", self.dim)));
        }
        Ok(())
    }
}

/// Caputo derivative of the piecewise-linear interpolant on arbitrary nodes.
fn caputo_nonuniform(t: &[f64], q: &[f64], alpha: f64) -> Vec<f64> {
    let n = t.len();
    let e = 1.0 - alpha;
    let c = 1.0 / gamma(2.0 - alpha);
    let mut out = vec![0.0; n];
    for m in 1..n {
        let mut s = 0.0;
        for k in 0..m {
            let slope = (q[k + 1] - q[k]) / (t[k + 1] - t[k]);
            s += slope * ((t[m] - t[k]).powf(e) - (t[m] - t[k + 1]).powf(e));
        }
        out[m] = c * s;
    }
    out
}

/// Panel of nested subintervals `[k/20, 1 - k/20]`, `k = 1..=8`, as node ranges.
fn panel(n: usize) -> Vec<(usize, usize)> {
    (1..=8)
        .map(|k| {
            let ia = ((k * n) as f64 / 20.0).round() as usize;
            (ia.max(1), n - ia.max(1))
        })
        .filter(|(ia, ib)| ib > ia && ib - ia >= 2)
        .collect()
}

/// Transformed action on node range `[ia, ib]` at parameter `eps`.
fn transformed_action(
    p: &VariationalProblem,
    q: &GridFunction,
    s: &SymmetryGroup,
    time_transform: bool,
    eps: f64,
    (ia, ib): (usize, usize),
) -> Result<f64> {
    let grid = p.grid();
    let h = grid.step();
    let d = p.dim();
    let alpha = p.alpha().value();
    let l = p.lagrangian();
    if !time_transform {
        let n = q.len();
        let mut mapped = vec![0.0; n * d];
        for i in 0..n {
            mapped[i * d..(i + 1) * d].copy_from_slice(&s.state_map(eps, q.row(i)));
        }
        let mapped = GridFunction::new(*grid, d, mapped)?;
        let v = mapped.map_components(|c| central_diff(c, h))?;
        let w = mapped.map_components(|c| caputo_left_slice(c, h, alpha))?;
        let integrand: Vec<f64> =
            (ia..=ib).map(|i| l.value(grid.node(i), mapped.row(i), v.row(i), w.row(i))).collect();
        return Ok(trapezoid(&integrand, h));
    }
    let m = ib - ia + 1;
    let tbar: Vec<f64> = (ia..=ib).map(|i| s.time_map(eps, grid.node(i))).collect();
    if tbar[0] < grid.a() {
        return Err(Error::InvalidArgument(format!(
            "transformed Caputo base point {} lies before a = {}; no data there",
            tbar[0],
            grid.a()
        )));
    }
    let jac = central_diff(&tbar, h);
    let mut qbar = vec![vec![0.0; m]; d];
    for (j, i) in (ia..=ib).enumerate() {
        for (k, x) in s.state_map(eps, q.row(i)).into_iter().enumerate() {
            qbar[k][j] = x;
        }
    }
    let mut vel = vec![vec![0.0; m]; d];
    let mut cap = vec![vec![0.0; m]; d];
    for k in 0..d {
        let dq = central_diff(&qbar[k], h);
        vel[k] = dq.iter().zip(&jac).map(|(a, b)| a / b).collect();
        cap[k] = if alpha == 1.0 { vel[k].clone() } else { caputo_nonuniform(&tbar, &qbar[k], alpha) };
    }
    let mut integrand = Vec::with_capacity(m);
    for j in 0..m {
        let qj: Vec<f64> = (0..d).map(|k| qbar[k][j]).collect();
        let vj: Vec<f64> = (0..d).map(|k| vel[k][j]).collect();
        let wj: Vec<f64> = (0..d).map(|k| cap[k][j]).collect();
        integrand.push(l.value(tbar[j], &qj, &vj, &wj) * jac[j]);
    }
    Ok(trapezoid(&integrand, h))
}

/// Max over the subinterval panel of `|d/dε|_{ε=0}` (transformed action -
/// original action), by a central ε-difference with `ε = 1e-4`.
///
/// Without time transformation the state map acts on the whole trajectory
/// and the Caputo derivative keeps its base point `a`. With it, the time map
/// moves the integration window and the Caputo base point becomes
/// `ψ₁(ε, t_a)`; windows whose base point would leave `[a, b]` are an error.
pub fn invariance_defect(p: &VariationalProblem, q: &GridFunction, s: &SymmetryGroup, time_transform: bool) -> Result<f64> {
    invariance_defect_with_eps(p, q, s, time_transform, DEFAULT_EPSILON)
}

pub fn invariance_defect_with_eps(
    p: &VariationalProblem,
    q: &GridFunction,
    s: &SymmetryGroup,
    time_transform: bool,
    eps: f64,
) -> Result<f64> {
    s.check_dim(p.dim())?;
    p.sample(q)?;
    let mut worst: f64 = 0.0;
    for window in panel(p.grid().intervals()) {
        let up = transformed_action(p, q, s, time_transform, eps, window)?;
        let down = transformed_action(p, q, s, time_transform, -eps, window)?;
        worst = worst.max(((up - down) / (2.0 * eps)).abs());
    }
    Ok(worst)
}

/// `f₂·d/dt ∂₃L + ∂₃L·d/dt f₂ + ∂₄L·C_a D^α f₂ - f₂·RL_b D^α ∂₄L` at interior
/// nodes (zero at the ends). Vanishes along extremals of invariant problems.
pub fn invariance_necessary_residual(p: &VariationalProblem, q: &GridFunction, s: &SymmetryGroup) -> Result<GridFunction> {
    s.check_dim(p.dim())?;
    let smp = p.sample(q)?;
    let f2 = s.f2_along(q)?;
    let h = p.grid().step();
    let alpha = p.alpha().value();
    let n = q.len();
    let mut out = vec![0.0; n];
    for k in 0..p.dim() {
        let fk = f2.component(k);
        let dv = smp.dv.component(k);
        let dw = smp.dw.component(k);
        let ddv = central_diff(&dv, h);
        let dfk = central_diff(&fk, h);
        let cap_f = caputo_left_slice(&fk, h, alpha);
        let rl_dw = rl_derivative_right_slice(&dw, h, alpha);
        for i in 1..n - 1 {
            out[i] += fk[i] * ddv[i] + dv[i] * dfk[i] + dw[i] * cap_f[i] - fk[i] * rl_dw[i];
        }
    }
    GridFunction::scalar(*p.grid(), out)
}

/// Truncated transfer series: `terms[r][i]` is the `r`-th term at node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSeries {
    pub truncation_order: usize,
    pub terms: Vec<Vec<f64>>,
    /// Max-norm of the last retained term.
    pub tail_estimate: f64,
}

impl InvariantSeries {
    /// Node-wise sum of the retained terms.
    pub fn sum(&self) -> Vec<f64> {
        let n = self.terms.first().map_or(0, |t| t.len());
        (0..n).map(|i| self.terms.iter().map(|t| t[i]).sum()).collect()
    }
}

/// Terms `r = 0..=R` of
/// `Σ (-1)^r g^(r) · I_a^{r+1-α}(f₂ - f₂(a)) + f₂^(r) · I_b^{r+1-α} g`,
/// whose time derivative approximates `g·C_a D^α f₂ - f₂·RL_b D^α g`.
/// Derivatives are iterated central differences; `R > 6` is rejected.
pub fn transfer_series(f2: &GridFunction, g: &GridFunction, alpha: FractionalOrder, truncation: usize) -> Result<InvariantSeries> {
    f2.check_compatible(g)?;
    let alpha = FractionalOrder::derivative(alpha.value())?.value();
    if truncation > MAX_TRUNCATION {
        return Err(Error::InvalidArgument(format!(
            "truncation order {truncation} exceeds {MAX_TRUNCATION}; higher numerical derivatives are noise"
        )));
    }
    for (name, gf) in [("f2", f2), ("g", g)] {
        if let Some(i) = gf.first_flagged() {
            return Err(Error::NonFinite { what: name.into(), index: i });
        }
    }
    let h = f2.grid().step();
    let n = f2.len();
    let mut terms = vec![vec![0.0; n]; truncation + 1];
    for k in 0..f2.dim() {
        let fk = f2.component(k);
        let gk = g.component(k);
        let shifted: Vec<f64> = fk.iter().map(|x| x - fk[0]).collect();
        for (r, term) in terms.iter_mut().enumerate() {
            let order = r as f64 + 1.0 - alpha;
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            let g_r = iterated_diff(&gk, h, r);
            let f_r = iterated_diff(&fk, h, r);
            let il = rl_integral_left_slice(&shifted, h, order);
            let ir = rl_integral_right_slice(&gk, h, order);
            for i in 0..n {
                term[i] += sign * g_r[i] * il[i] + f_r[i] * ir[i];
            }
        }
    }
    let tail_estimate = terms[truncation].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !tail_estimate.is_finite() {
        return Err(Error::NonFinite { what: "transfer series tail".into(), index: truncation });
    }
    Ok(InvariantSeries { truncation_order: truncation, terms, tail_estimate })
}

/// The Noether quantity of `s` along `q`, with the transfer series truncated
/// after `truncation` terms. `τ ≡ 0` gives the time-independent form.
pub fn noether_quantity(p: &VariationalProblem, q: &GridFunction, s: &SymmetryGroup, truncation: usize) -> Result<GridFunction> {
    s.check_dim(p.dim())?;
    let smp = p.sample(q)?;
    let f2 = s.f2_along(q)?;
    let series = transfer_series(&f2, &smp.dw, p.alpha(), truncation)?.sum();
    let alpha = p.alpha().value();
    let grid = p.grid();
    let out: Vec<f64> = (0..q.len())
        .map(|i| {
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let tau = s.tau(grid.node(i));
            let time_part = smp.lagrangian[i] - dot(smp.velocity.row(i), smp.dv.row(i)) - alpha * dot(smp.dw.row(i), smp.caputo.row(i));
            dot(f2.row(i), smp.dv.row(i)) + series[i] + tau * time_part
        })
        .collect();
    GridFunction::scalar(*grid, out)
}

/// `L - q̇·∂₃L - α ∂₄L · C_a D^α q` along `q`, for autonomous Lagrangians.
pub fn autonomous_quantity(p: &VariationalProblem, q: &GridFunction) -> Result<GridFunction> {
    if !p.lagrangian().is_autonomous() {
        return Err(Error::InvalidArgument("autonomous_quantity needs a time-independent Lagrangian".into()));
    }
    let s = SymmetryGroup::time_translation(p.dim())?;
    noether_quantity(p, q, &s, 0)
}

/// `max |C(t) - C(t₀)| / (1 + |C(t₀)|)` over interior nodes, `t₀` the first
/// interior node.
pub fn drift_report(c: &GridFunction) -> Result<f64> {
    if c.dim() != 1 {
        return Err(Error::DimensionMismatch(format!("drift needs a scalar quantity, got dim {}", c.dim())));
    }
    let v = c.values();
    let n = v.len();
    if let Some(i) = (1..n - 1).find(|&i| !v[i].is_finite()) {
        return Err(Error::NonFinite { what: "conserved quantity".into(), index: i });
    }
    let c0 = v[1];
    Ok(v[1..n - 1].iter().fold(0.0f64, |m, x| m.max((x - c0).abs())) / (1.0 + c0.abs()))
}

