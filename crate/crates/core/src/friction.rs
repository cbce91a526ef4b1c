//! Fractional linear friction: `L = m q̇²/2 - U(q) + (γ/2) (C_a D^{1/2} q)²`.
//!
//! The half-derivative term carries the friction energy. On a window
//! `[a, b]` it vanishes linearly as the window shrinks, and the limiting
//! equation of motion is the classical damped one `m q̈ + γ q̇ = F(q)`.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::io::Write;
use std::sync::Arc;

use crate::calculus::central_diff;
use crate::error::{Error, Result};
use crate::fracops::{caputo_left_slice, rl_derivative_right_slice, FractionalOrder};
use crate::grid::{write_table, Grid, GridFunction};
use crate::noether::drift_report;
use crate::variational::{Lagrangian, LagrangianSpec, Partials, Polynomial, VariationalProblem};

const HALF: f64 = 0.5;

/// A potential energy `U(q)` with derivative `dU/dq`.
pub trait Potential: Debug + Send + Sync {
    fn value(&self, q: f64) -> f64;
    fn derivative(&self, q: f64) -> f64;
}

impl Potential for Polynomial {
    fn value(&self, q: f64) -> f64 {
        self.eval(q)
    }
    fn derivative(&self, q: f64) -> f64 {
        Polynomial::derivative(self, q)
    }
}

#[derive(Debug, Clone)]
pub struct FrictionProblem {
    mass: f64,
    gamma: f64,
    potential: Arc<dyn Potential>,
    window: Grid,
}

impl FrictionProblem {
    pub fn new(mass: f64, gamma: f64, potential: impl Potential + 'static, window: Grid) -> Result<Self> {
        Self::from_arc(mass, gamma, Arc::new(potential), window)
    }

    pub fn from_arc(mass: f64, gamma: f64, potential: Arc<dyn Potential>, window: Grid) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidArgument(format!("mass must be positive, got {mass}")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("friction coefficient must be non-negative, got {gamma}")));
        }
        for k in -8..=8 {
            let q = k as f64 * 0.5;
            if !potential.value(q).is_finite() || !potential.derivative(q).is_finite() {
                return Err(Error::NonFinite { what: format!("potential at q = {q}"), index: 0 });
            }
        }
        Ok(FrictionProblem { mass, gamma, potential, window })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn window(&self) -> &Grid {
        &self.window
    }

    pub fn potential(&self) -> &dyn Potential {
        self.potential.as_ref()
    }

    /// `F(q) = -dU/dq`.
    pub fn force(&self, q: f64) -> f64 {
        -self.potential.derivative(q)
    }

    pub fn with_window(&self, window: Grid) -> Self {
        FrictionProblem { window, ..self.clone() }
    }

    /// The variational problem on the window with `α = 1/2`.
    pub fn variational_problem(&self, q_a: f64, q_b: f64) -> Result<VariationalProblem> {
        VariationalProblem::new(friction_lagrangian(self), self.window, FractionalOrder::derivative(HALF)?, vec![q_a], vec![q_b])
    }
}

#[derive(Debug)]
struct FrictionLagrangian {
    mass: f64,
    gamma: f64,
    potential: Arc<dyn Potential>,
}

impl Lagrangian for FrictionLagrangian {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, _t: f64, q: &[f64], v: &[f64], w: &[f64]) -> f64 {
        0.5 * self.mass * v[0] * v[0] - self.potential.value(q[0]) + 0.5 * self.gamma * w[0] * w[0]
    }
    fn partials(&self, _t: f64, q: &[f64], v: &[f64], w: &[f64]) -> Option<Partials> {
        Some(Partials { dq: vec![-self.potential.derivative(q[0])], dv: vec![self.mass * v[0]], dw: vec![self.gamma * w[0]] })
    }
    fn is_autonomous(&self) -> bool {
        true
    }
}

/// The friction Lagrangian with analytic partials; pair it with `α = 1/2`.
pub fn friction_lagrangian(fp: &FrictionProblem) -> LagrangianSpec {
    LagrangianSpec::new(FrictionLagrangian { mass: fp.mass, gamma: fp.gamma, potential: fp.potential.clone() })
        .expect("analytic friction partials are exact")
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrictionDiagnostics {
    /// `m q̇`.
    pub p: GridFunction,
    /// `γ C_a D^{1/2} q`.
    pub p_half: GridFunction,
    /// `m q̇²/2 + U(q) + (γ/2)(C_a D^{1/2} q)²`.
    pub hamiltonian: GridFunction,
    /// `(γ/2)(C_a D^{1/2} q)² - H`.
    pub noether_defect: GridFunction,
}

impl FrictionDiagnostics {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let grid = self.p.grid();
        let header = ["t", "p", "p_half", "H", "noether_defect"].map(String::from);
        let cols = [grid.nodes(), self.p.component(0), self.p_half.component(0), self.hamiltonian.component(0), self.noether_defect.component(0)];
        write_table(w, &header, &cols)
    }
}

fn check_on_window(fp: &FrictionProblem, q: &GridFunction) -> Result<()> {
    if q.dim() != 1 {
        return Err(Error::DimensionMismatch(format!("friction trajectories are scalar, got dim {}", q.dim())));
    }
    if *q.grid() != fp.window {
        return Err(Error::InvalidGrid(format!("trajectory grid {:?} differs from the window {:?}", q.grid(), fp.window)));
    }
    if let Some(i) = q.first_flagged() {
        return Err(Error::NonFinite { what: "trajectory".into(), index: i });
    }
    Ok(())
}

pub fn friction_diagnostics(fp: &FrictionProblem, q: &GridFunction) -> Result<FrictionDiagnostics> {
    check_on_window(fp, q)?;
    let h = fp.window.step();
    let qs = q.values();
    let v = central_diff(qs, h);
    let w = caputo_left_slice(qs, h, HALF);
    let n = qs.len();
    let mut p = Vec::with_capacity(n);
    let mut p_half = Vec::with_capacity(n);
    let mut ham = Vec::with_capacity(n);
    let mut defect = Vec::with_capacity(n);
    for i in 0..n {
        let friction = 0.5 * fp.gamma * w[i] * w[i];
        let hi = 0.5 * fp.mass * v[i] * v[i] + fp.potential.value(qs[i]) + friction;
        p.push(fp.mass * v[i]);
        p_half.push(fp.gamma * w[i]);
        ham.push(hi);
        defect.push(friction - hi);
    }
    if let Some(i) = (1..n - 1).find(|&i| !ham[i].is_finite()) {
        return Err(Error::NonFinite { what: "Hamiltonian".into(), index: i });
    }
    let g = fp.window;
    Ok(FrictionDiagnostics {
        p: GridFunction::with_flags(g, 1, p)?,
        p_half: GridFunction::with_flags(g, 1, p_half)?,
        hamiltonian: GridFunction::with_flags(g, 1, ham)?,
        noether_defect: GridFunction::with_flags(g, 1, defect)?,
    })
}

/// `m q̈ - γ RL_b D^{1/2}(C_a D^{1/2} q) - F(q)` at interior nodes, zero at
/// the ends. It is the negative of the variational Euler-Lagrange residual.
pub fn eom_residual(fp: &FrictionProblem, q: &GridFunction) -> Result<GridFunction> {
    check_on_window(fp, q)?;
    let h = fp.window.step();
    let qs = q.values();
    let p: Vec<f64> = central_diff(qs, h).iter().map(|v| fp.mass * v).collect();
    let dp = central_diff(&p, h);
    let pw: Vec<f64> = caputo_left_slice(qs, h, HALF).iter().map(|w| fp.gamma * w).collect();
    let rl = rl_derivative_right_slice(&pw, h, HALF);
    let n = qs.len();
    let mut r = vec![0.0; n];
    for i in 1..n - 1 {
        r[i] = dp[i] - rl[i] - fp.force(qs[i]);
    }
    GridFunction::new(fp.window, 1, r)
}

/// One row of [`window_shrink_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRow {
    pub width: f64,
    pub midpoint: f64,
    /// `(γ/2)(C_a D^{1/2} q)²` at the midpoint.
    pub friction_energy: f64,
    /// `(2/π) γ q̇² Δt` at the midpoint.
    pub first_order_estimate: f64,
    /// `friction_energy / first_order_estimate`.
    pub ratio: f64,
    /// `γ C_a D^{1/2} q` at the midpoint.
    pub p_half: f64,
    /// `friction_energy` over the previous row's value.
    pub halving_ratio: Option<f64>,
    /// [`drift_report`] of `H` over the window.
    pub hamiltonian_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowTable {
    pub rows: Vec<WindowRow>,
}

impl WindowTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let header = ["width", "midpoint", "friction_energy", "first_order_estimate", "ratio", "p_half", "halving_ratio", "hamiltonian_drift"]
            .map(String::from);
        let col = |f: &dyn Fn(&WindowRow) -> f64| self.rows.iter().map(f).collect::<Vec<f64>>();
        let cols = [
            col(&|r| r.width),
            col(&|r| r.midpoint),
            col(&|r| r.friction_energy),
            col(&|r| r.first_order_estimate),
            col(&|r| r.ratio),
            col(&|r| r.p_half),
            col(&|r| r.halving_ratio.unwrap_or(f64::NAN)),
            col(&|r| r.hamiltonian_drift),
        ];
        write_table(w, &header, &cols)
    }
}

/// Friction energy at the midpoint of each window against the first-order
/// estimate `(2/π) γ q̇² Δt`. Windows must share a midpoint (which must be a
/// grid node) and shrink strictly.
pub fn window_shrink_study(fp: &FrictionProblem, q_global: &dyn Fn(f64) -> f64, windows: &[Grid]) -> Result<WindowTable> {
    let Some(first) = windows.first() else {
        return Err(Error::InvalidArgument("no windows given".into()));
    };
    let mid = 0.5 * (first.a() + first.b());
    let mut rows: Vec<WindowRow> = Vec::with_capacity(windows.len());
    for (k, g) in windows.iter().enumerate() {
        let m = 0.5 * (g.a() + g.b());
        let width = g.b() - g.a();
        if (m - mid).abs() > 1e-12 * (1.0 + mid.abs()) {
            return Err(Error::InvalidArgument(format!("window {k} is centred at {m}, not {mid}")));
        }
        if k > 0 && width >= windows[k - 1].b() - windows[k - 1].a() {
            return Err(Error::InvalidArgument(format!("window {k} does not shrink")));
        }
        if g.intervals() % 2 != 0 {
            return Err(Error::InvalidGrid(format!("window {k} needs an even number of intervals so the midpoint is a node")));
        }
        let q = GridFunction::from_fn(*g, q_global)?;
        let local = fp.with_window(*g);
        let diag = friction_diagnostics(&local, &q)?;
        let im = g.intervals() / 2;
        let p_half = diag.p_half.value(im, 0);
        let w = if fp.gamma > 0.0 { p_half / fp.gamma } else { caputo_left_slice(q.values(), g.step(), HALF)[im] };
        let qdot = diag.p.value(im, 0) / fp.mass;
        let friction_energy = 0.5 * fp.gamma * w * w;
        let first_order_estimate = 2.0 / PI * fp.gamma * qdot * qdot * width;
        let ratio = if first_order_estimate != 0.0 { friction_energy / first_order_estimate } else { f64::NAN };
        let halving_ratio = rows.last().map(|r: &WindowRow| friction_energy / r.friction_energy);
        rows.push(WindowRow {
            width,
            midpoint: m,
            friction_energy,
            first_order_estimate,
            ratio,
            p_half,
            halving_ratio,
            hamiltonian_drift: drift_report(&diag.hamiltonian)?,
        });
    }
    Ok(WindowTable { rows })
}

/// Windows `[mid - w/2, mid + w/2]` with `w = width / 2^k`, `k < count`, each
/// with `intervals` intervals.
pub fn nested_windows(mid: f64, width: f64, count: usize, intervals: usize) -> Result<Vec<Grid>> {
    (0..count)
        .map(|k| {
            let w = width / 2f64.powi(k as i32);
            Grid::new(mid - 0.5 * w, mid + 0.5 * w, intervals)
        })
        .collect()
}

/// Integrates `m q̈ + γ q̇ = F(q)` on `[0, T]` with classical RK4. Returns
/// `[q, q̇]` per node.
pub fn simulate_damped_eom(fp: &FrictionProblem, q0: f64, v0: f64, t_end: f64, steps: usize) -> Result<GridFunction> {
    if steps < 16 {
        return Err(Error::InvalidArgument(format!("at least 16 steps are needed, got {steps}")));
    }
    let grid = Grid::new(0.0, t_end, steps)?;
    let h = grid.step();
    let rhs = |q: f64, v: f64| (v, (fp.force(q) - fp.gamma * v) / fp.mass);
    let mut values = Vec::with_capacity(2 * (steps + 1));
    let (mut q, mut v) = (q0, v0);
    values.extend([q, v]);
    for i in 1..=steps {
        let (k1q, k1v) = rhs(q, v);
        let (k2q, k2v) = rhs(q + 0.5 * h * k1q, v + 0.5 * h * k1v);
        let (k3q, k3v) = rhs(q + 0.5 * h * k2q, v + 0.5 * h * k2v);
        let (k4q, k4v) = rhs(q + h * k3q, v + h * k3v);
        q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if !(q.abs() <= 1e12) || !v.is_finite() {
            return Err(Error::Unstable { t: grid.node(i), magnitude: q.abs() });
        }
        values.extend([q, v]);
    }
    GridFunction::new(grid, 2, values)
}
