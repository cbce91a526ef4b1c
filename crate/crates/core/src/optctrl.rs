//! Optimal control with classical and Caputo dynamics:
//!
//! ```text
//! minimize ∫ L(t, q, u, μ) dt
//! subject to q̇ = φ(t, q, u),  C_a D^α q = ρ(t, q, μ),  q(a) = q_a
//! ```
//!
//! with Hamiltonian `H = L + p·φ + p_α·ρ`. The solver transcribes the
//! problem on cells (as the variational solver does) and imposes both
//! dynamics as quadratic penalties; the costates are the scaled penalty
//! defects and are only first-order accurate.

use std::fmt::Debug;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{central_diff, trapezoid};
use crate::error::{Error, Result};
use crate::fracops::{caputo_left_slice, rl_derivative_right_slice, FractionalOrder};
use crate::grid::{write_table, Grid, GridFunction};
use crate::noether::{transfer_series, SymmetryGroup};
use crate::optimize::{minimize, InitialHessian, MinimizeOptions};
use crate::variational::{LagrangianSpec, MidpointCaputo, Polynomial, VariationalProblem};

/// Largest state or control dimension accepted.
pub const MAX_DIM: usize = 4;
/// Largest number of grid intervals accepted by [`solve_control`].
pub const MAX_INTERVALS: usize = 2048;
const PROBES: usize = 100;
const PARTIALS_RTOL: f64 = 1e-5;

/// `∂L/∂q`, `∂L/∂u`, `∂L/∂μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostPartials {
    pub dq: Vec<f64>,
    pub du: Vec<f64>,
    pub dmu: Vec<f64>,
}

/// Jacobian of a map `(q, c) ↦ y ∈ ℝⁿ`, row-major with one row per output.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    /// `n × n`.
    pub state: Vec<f64>,
    /// `n × dim(c)`.
    pub control: Vec<f64>,
}

impl Jacobian {
    /// `yᵀ ∂/∂q` and `yᵀ ∂/∂c`.
    fn transpose_apply(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = y.len();
        let tapply = |m: &[f64]| {
            let cols = m.len() / n.max(1);
            let mut out = vec![0.0; cols];
            for (i, yi) in y.iter().enumerate() {
                for (k, o) in out.iter_mut().enumerate() {
                    *o += yi * m[i * cols + k];
                }
            }
            out
        };
        (tapply(&self.state), tapply(&self.control))
    }
}

/// Cost and dynamics of a control problem. Partials default to central
/// finite differences.
pub trait ControlSystem: Debug + Send + Sync {
    /// State, control and fractional-control dimensions `(n, m, d)`. With
    /// `d = 0` there is no fractional dynamics.
    fn dims(&self) -> (usize, usize, usize);
    fn cost(&self, t: f64, q: &[f64], u: &[f64], mu: &[f64]) -> f64;
    /// `φ(t, q, u)`.
    fn velocity(&self, t: f64, q: &[f64], u: &[f64]) -> Vec<f64>;
    /// `ρ(t, q, μ)`; unused when `d = 0`.
    fn fractional_velocity(&self, t: f64, q: &[f64], mu: &[f64]) -> Vec<f64>;
    fn cost_partials(&self, _t: f64, _q: &[f64], _u: &[f64], _mu: &[f64]) -> Option<CostPartials> {
        None
    }
    fn velocity_jacobian(&self, _t: f64, _q: &[f64], _u: &[f64]) -> Option<Jacobian> {
        None
    }
    fn fractional_jacobian(&self, _t: f64, _q: &[f64], _mu: &[f64]) -> Option<Jacobian> {
        None
    }
    fn is_autonomous(&self) -> bool;
}

fn fd_step(x: f64) -> f64 {
    1e-6 * (1.0 + x.abs())
}

fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|k| {
            let s = fd_step(x[k]);
            y[k] = x[k] + s;
            let up = f(&y);
            y[k] = x[k] - s;
            let down = f(&y);
            y[k] = x[k];
            (up - down) / (2.0 * s)
        })
        .collect()
}

fn fd_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], rows: usize) -> Vec<f64> {
    let cols = x.len();
    let mut out = vec![0.0; rows * cols];
    let mut y = x.to_vec();
    for k in 0..cols {
        let s = fd_step(x[k]);
        y[k] = x[k] + s;
        let up = f(&y);
        y[k] = x[k] - s;
        let down = f(&y);
        y[k] = x[k];
        for i in 0..rows {
            out[i * cols + k] = (up[i] - down[i]) / (2.0 * s);
        }
    }
    out
}

/// A [`ControlSystem`] whose analytic partials were checked at construction.
#[derive(Debug, Clone)]
pub struct ControlSpec {
    inner: Arc<dyn ControlSystem>,
}

impl ControlSpec {
    pub fn new(system: impl ControlSystem + 'static) -> Result<Self> {
        Self::from_arc(Arc::new(system))
    }

    pub fn from_arc(inner: Arc<dyn ControlSystem>) -> Result<Self> {
        let (n, m, d) = inner.dims();
        if n == 0 || m == 0 || n > MAX_DIM || m > MAX_DIM || d > MAX_DIM {
            return Err(Error::InvalidArgument(format!("dimensions (n, m, d) = ({n}, {m}, {d}) must satisfy 1 <= n, m <= 4, d <= 4")));
        }
        let spec = ControlSpec { inner };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.inner.dims()
    }

    pub fn has_fractional_dynamics(&self) -> bool {
        self.dims().2 > 0
    }

    pub fn is_autonomous(&self) -> bool {
        self.inner.is_autonomous()
    }

    pub fn cost(&self, t: f64, q: &[f64], u: &[f64], mu: &[f64]) -> f64 {
        self.inner.cost(t, q, u, mu)
    }

    pub fn velocity(&self, t: f64, q: &[f64], u: &[f64]) -> Vec<f64> {
        self.inner.velocity(t, q, u)
    }

    /// `ρ`, or zeros without fractional dynamics.
    pub fn fractional_velocity(&self, t: f64, q: &[f64], mu: &[f64]) -> Vec<f64> {
        if self.has_fractional_dynamics() {
            self.inner.fractional_velocity(t, q, mu)
        } else {
            vec![0.0; q.len()]
        }
    }

    pub fn cost_partials(&self, t: f64, q: &[f64], u: &[f64], mu: &[f64]) -> CostPartials {
        self.inner.cost_partials(t, q, u, mu).unwrap_or_else(|| self.fd_cost_partials(t, q, u, mu))
    }

    pub fn velocity_jacobian(&self, t: f64, q: &[f64], u: &[f64]) -> Jacobian {
        self.inner.velocity_jacobian(t, q, u).unwrap_or_else(|| self.fd_velocity_jacobian(t, q, u))
    }

    /// Jacobian of `ρ`, or zeros without fractional dynamics.
    pub fn fractional_jacobian(&self, t: f64, q: &[f64], mu: &[f64]) -> Jacobian {
        let n = q.len();
        if !self.has_fractional_dynamics() {
            return Jacobian { state: vec![0.0; n * n], control: vec![] };
        }
        self.inner.fractional_jacobian(t, q, mu).unwrap_or_else(|| self.fd_fractional_jacobian(t, q, mu))
    }

    fn fd_cost_partials(&self, t: f64, q: &[f64], u: &[f64], mu: &[f64]) -> CostPartials {
        CostPartials {
            dq: fd_gradient(&|x| self.inner.cost(t, x, u, mu), q),
            du: fd_gradient(&|x| self.inner.cost(t, q, x, mu), u),
            dmu: fd_gradient(&|x| self.inner.cost(t, q, u, x), mu),
        }
    }

    fn fd_velocity_jacobian(&self, t: f64, q: &[f64], u: &[f64]) -> Jacobian {
        let n = q.len();
        Jacobian {
            state: fd_jacobian(&|x| self.inner.velocity(t, x, u), q, n),
            control: fd_jacobian(&|x| self.inner.velocity(t, q, x), u, n),
        }
    }

    fn fd_fractional_jacobian(&self, t: f64, q: &[f64], mu: &[f64]) -> Jacobian {
        let n = q.len();
        Jacobian {
            state: fd_jacobian(&|x| self.inner.fractional_velocity(t, x, mu), q, n),
            control: fd_jacobian(&|x| self.inner.fractional_velocity(t, q, x), mu, n),
        }
    }

    fn validate(&self) -> Result<()> {
        let (n, m, d) = self.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
        let check = |name: &str, a: &[f64], b: &[f64]| -> Result<()> {
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch(format!("{name} has {} entries, expected {}", a.len(), b.len())));
            }
            for (k, (x, y)) in a.iter().zip(b).enumerate() {
                if (x - y).abs() > PARTIALS_RTOL * x.abs().max(1.0) {
                    return Err(Error::PartialsMismatch(format!("{name}[{k}] = {x} but finite differences give {y}")));
                }
            }
            Ok(())
        };
        for _ in 0..PROBES {
            let t = rng.gen_range(0.0..1.0);
            let mut draw = |k: usize| (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
            let (q, u, mu) = (draw(n), draw(m), draw(d));
            let phi = self.inner.velocity(t, &q, &u);
            if phi.len() != n {
                return Err(Error::DimensionMismatch(format!("velocity map returns {} components, expected {n}", phi.len())));
            }
            if d > 0 && self.inner.fractional_velocity(t, &q, &mu).len() != n {
                return Err(Error::DimensionMismatch(format!("fractional velocity map must return {n} components")));
            }
            if let Some(a) = self.inner.cost_partials(t, &q, &u, &mu) {
                let fd = self.fd_cost_partials(t, &q, &u, &mu);
                check("dL/dq", &a.dq, &fd.dq)?;
                check("dL/du", &a.du, &fd.du)?;
                check("dL/dmu", &a.dmu, &fd.dmu)?;
            }
            if let Some(a) = self.inner.velocity_jacobian(t, &q, &u) {
                let fd = self.fd_velocity_jacobian(t, &q, &u);
                check("dphi/dq", &a.state, &fd.state)?;
                check("dphi/du", &a.control, &fd.control)?;
            }
            if d > 0 {
                if let Some(a) = self.inner.fractional_jacobian(t, &q, &mu) {
                    let fd = self.fd_fractional_jacobian(t, &q, &mu);
                    check("drho/dq", &a.state, &fd.state)?;
                    check("drho/dmu", &a.control, &fd.control)?;
                }
            }
        }
        Ok(())
    }
}

/// Separable polynomial family with `m = n` and `d ∈ {0, n}`:
///
/// ```text
/// L = Σ_k cost_q(q_k) + cost_u(u_k) + cost_mu(μ_k)
/// φ_k = velocity_q(q_k) + velocity_u u_k
/// ρ_k = fractional_q(q_k) + fractional_mu μ_k
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialControl {
    pub dim: usize,
    pub fractional: bool,
    pub cost_q: Polynomial,
    pub cost_u: Polynomial,
    pub cost_mu: Polynomial,
    pub velocity_q: Polynomial,
    pub velocity_u: f64,
    pub fractional_q: Polynomial,
    pub fractional_mu: f64,
}

impl PolynomialControl {
    /// `L = (s q² + r u²)/2`, `q̇ = a q + b u`, no fractional dynamics.
    pub fn linear_quadratic(s: f64, r: f64, a: f64, b: f64) -> Self {
        PolynomialControl {
            dim: 1,
            fractional: false,
            cost_q: Polynomial::new(vec![0.0, 0.0, 0.5 * s]),
            cost_u: Polynomial::new(vec![0.0, 0.0, 0.5 * r]),
            cost_mu: Polynomial::default(),
            velocity_q: Polynomial::new(vec![0.0, a]),
            velocity_u: b,
            fractional_q: Polynomial::default(),
            fractional_mu: 0.0,
        }
    }
}

fn diag(n: usize, f: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for k in 0..n {
        m[k * n + k] = f(k);
    }
    m
}

impl ControlSystem for PolynomialControl {
    fn dims(&self) -> (usize, usize, usize) {
        (self.dim, self.dim, if self.fractional { self.dim } else { 0 })
    }
    fn cost(&self, _t: f64, q: &[f64], u: &[f64], mu: &[f64]) -> f64 {
        q.iter().map(|&x| self.cost_q.eval(x)).sum::<f64>()
            + u.iter().map(|&x| self.cost_u.eval(x)).sum::<f64>()
            + mu.iter().map(|&x| self.cost_mu.eval(x)).sum::<f64>()
    }
    fn velocity(&self, _t: f64, q: &[f64], u: &[f64]) -> Vec<f64> {
        q.iter().zip(u).map(|(&x, &c)| self.velocity_q.eval(x) + self.velocity_u * c).collect()
    }
    fn fractional_velocity(&self, _t: f64, q: &[f64], mu: &[f64]) -> Vec<f64> {
        q.iter().zip(mu).map(|(&x, &c)| self.fractional_q.eval(x) + self.fractional_mu * c).collect()
    }
    fn cost_partials(&self, _t: f64, q: &[f64], u: &[f64], mu: &[f64]) -> Option<CostPartials> {
        Some(CostPartials {
            dq: q.iter().map(|&x| self.cost_q.derivative(x)).collect(),
            du: u.iter().map(|&x| self.cost_u.derivative(x)).collect(),
            dmu: mu.iter().map(|&x| self.cost_mu.derivative(x)).collect(),
        })
    }
    fn velocity_jacobian(&self, _t: f64, q: &[f64], _u: &[f64]) -> Option<Jacobian> {
        let n = self.dim;
        Some(Jacobian { state: diag(n, |k| self.velocity_q.derivative(q[k])), control: diag(n, |_| self.velocity_u) })
    }
    fn fractional_jacobian(&self, _t: f64, q: &[f64], _mu: &[f64]) -> Option<Jacobian> {
        let n = self.dim;
        Some(Jacobian { state: diag(n, |k| self.fractional_q.derivative(q[k])), control: diag(n, |_| self.fractional_mu) })
    }
    fn is_autonomous(&self) -> bool {
        true
    }
}

/// `φ = u`, `ρ = μ`, `L(t, q, u, μ)` taken from a variational Lagrangian.
#[derive(Debug, Clone)]
pub struct ReducedVariational {
    pub lagrangian: LagrangianSpec,
}

impl ControlSystem for ReducedVariational {
    fn dims(&self) -> (usize, usize, usize) {
        let n = self.lagrangian.dim();
        (n, n, n)
    }
    fn cost(&self, t: f64, q: &[f64], u: &[f64], mu: &[f64]) -> f64 {
        self.lagrangian.value(t, q, u, mu)
    }
    fn velocity(&self, _t: f64, _q: &[f64], u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }
    fn fractional_velocity(&self, _t: f64, _q: &[f64], mu: &[f64]) -> Vec<f64> {
        mu.to_vec()
    }
    fn cost_partials(&self, t: f64, q: &[f64], u: &[f64], mu: &[f64]) -> Option<CostPartials> {
        let d = self.lagrangian.partials(t, q, u, mu);
        Some(CostPartials { dq: d.dq, du: d.dv, dmu: d.dw })
    }
    fn velocity_jacobian(&self, _t: f64, q: &[f64], _u: &[f64]) -> Option<Jacobian> {
        let n = q.len();
        Some(Jacobian { state: vec![0.0; n * n], control: diag(n, |_| 1.0) })
    }
    fn fractional_jacobian(&self, _t: f64, q: &[f64], _mu: &[f64]) -> Option<Jacobian> {
        let n = q.len();
        Some(Jacobian { state: vec![0.0; n * n], control: diag(n, |_| 1.0) })
    }
    fn is_autonomous(&self) -> bool {
        self.lagrangian.is_autonomous()
    }
}

#[derive(Debug, Clone)]
pub struct ControlProblem {
    system: ControlSpec,
    alpha: FractionalOrder,
    grid: Grid,
    q_a: Vec<f64>,
    terminal: Option<Vec<f64>>,
}

impl ControlProblem {
    /// Free right endpoint; see [`ControlProblem::with_terminal`].
    pub fn new(system: ControlSpec, alpha: FractionalOrder, grid: Grid, q_a: Vec<f64>) -> Result<Self> {
        let alpha = FractionalOrder::derivative(alpha.value())?;
        let (n, _, _) = system.dims();
        if q_a.len() != n {
            return Err(Error::DimensionMismatch(format!("q_a has {} components, state has {n}", q_a.len())));
        }
        if q_a.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: "initial state".into(), index: 0 });
        }
        Ok(ControlProblem { system, alpha, grid, q_a, terminal: None })
    }

    /// Adds the terminal condition `q(b) = q_b`, imposed as a penalty with
    /// the same weight as the dynamics.
    pub fn with_terminal(mut self, q_b: Vec<f64>) -> Result<Self> {
        if q_b.len() != self.q_a.len() {
            return Err(Error::DimensionMismatch(format!("q_b has {} components, state has {}", q_b.len(), self.q_a.len())));
        }
        self.terminal = Some(q_b);
        Ok(self)
    }

    /// The control form of a variational problem: `φ = u`, `ρ = μ`, same
    /// initial and terminal data.
    pub fn reduction_of(p: &VariationalProblem) -> Result<Self> {
        let system = ControlSpec::new(ReducedVariational { lagrangian: p.lagrangian().clone() })?;
        ControlProblem::new(system, p.alpha(), *p.grid(), p.q_a().to_vec())?.with_terminal(p.q_b().to_vec())
    }

    pub fn system(&self) -> &ControlSpec {
        &self.system
    }

    pub fn alpha(&self) -> FractionalOrder {
        self.alpha
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn q_a(&self) -> &[f64] {
        &self.q_a
    }

    pub fn terminal(&self) -> Option<&[f64]> {
        self.terminal.as_deref()
    }

    pub fn with_intervals(&self, n: usize) -> Result<Self> {
        Ok(ControlProblem { grid: self.grid.refined(n)?, ..self.clone() })
    }
}

/// State, controls and costates on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PontryaginState {
    pub q: GridFunction,
    pub u: GridFunction,
    pub mu: GridFunction,
    pub p: GridFunction,
    /// Dimension `n`; identically zero without fractional dynamics.
    pub p_alpha: GridFunction,
}

impl PontryaginState {
    fn check(&self, cp: &ControlProblem) -> Result<()> {
        let (n, m, d) = cp.system.dims();
        for (name, gf, dim) in [("q", &self.q, n), ("u", &self.u, m), ("mu", &self.mu, d), ("p", &self.p, n), ("p_alpha", &self.p_alpha, n)] {
            if gf.dim() != dim {
                return Err(Error::DimensionMismatch(format!("{name} has dim {}, expected {dim}", gf.dim())));
            }
            if *gf.grid() != cp.grid {
                return Err(Error::InvalidGrid(format!("{name} is not on the problem grid")));
            }
            if let Some(i) = gf.first_flagged() {
                return Err(Error::NonFinite { what: name.into(), index: i });
            }
        }
        Ok(())
    }

    /// The substitution `u = q̇`, `μ = C_a D^α q`, `p = -∂₃L`, `p_α = -∂₄L`
    /// along a trajectory of a variational problem.
    pub fn from_variational(p: &VariationalProblem, q: &GridFunction) -> Result<Self> {
        let s = p.sample(q)?;
        Ok(PontryaginState {
            q: q.clone(),
            u: s.velocity,
            mu: s.caputo,
            p: s.dv.combine(-1.0, &s.dv, 0.0)?,
            p_alpha: s.dw.combine(-1.0, &s.dw, 0.0)?,
        })
    }
}

/// `H = L + p·φ + p_α·ρ` at node `i`.
pub fn hamiltonian(cp: &ControlProblem, state: &PontryaginState, i: usize) -> Result<f64> {
    state.check(cp)?;
    if i >= cp.grid.len() {
        return Err(Error::InvalidArgument(format!("node {i} outside the grid")));
    }
    Ok(hamiltonian_at(cp, state, i))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn hamiltonian_at(cp: &ControlProblem, s: &PontryaginState, i: usize) -> f64 {
    let t = cp.grid.node(i);
    let (q, u, mu) = (s.q.row(i), s.u.row(i), s.mu.row(i));
    let sys = &cp.system;
    sys.cost(t, q, u, mu) + dot(s.p.row(i), &sys.velocity(t, q, u)) + dot(s.p_alpha.row(i), &sys.fractional_velocity(t, q, mu))
}

/// Node-wise residuals of the Hamiltonian system and the stationarity
/// conditions; zero at the end nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PontryaginResiduals {
    /// `φ - q̇`.
    pub velocity: GridFunction,
    /// `ρ - C_a D^α q`.
    pub fractional_velocity: GridFunction,
    /// `∂₂H + ṗ - RL_b D^α p_α`.
    pub costate: GridFunction,
    /// `∂₃H`.
    pub control: GridFunction,
    /// `∂₄H`.
    pub fractional_control: GridFunction,
}

impl PontryaginResiduals {
    /// Max-norms in field order.
    pub fn norms(&self) -> [f64; 5] {
        [&self.velocity, &self.fractional_velocity, &self.costate, &self.control, &self.fractional_control].map(|g| g.max_norm())
    }
}

pub fn pontryagin_residuals(cp: &ControlProblem, state: &PontryaginState) -> Result<PontryaginResiduals> {
    state.check(cp)?;
    let (n, m, d) = cp.system.dims();
    let g = cp.grid;
    let h = g.step();
    let alpha = cp.alpha.value();
    let nodes = g.len();
    let qdot = state.q.map_components(|c| central_diff(c, h))?;
    let cap = state.q.map_components(|c| caputo_left_slice(c, h, alpha))?;
    let pdot = state.p.map_components(|c| central_diff(c, h))?;
    let rl = GridFunction::with_flags(g, n, {
        let cols: Vec<Vec<f64>> = (0..n).map(|k| rl_derivative_right_slice(&state.p_alpha.component(k), h, alpha)).collect();
        (0..nodes).flat_map(|i| cols.iter().map(move |c| c[i])).collect()
    })?;
    let mut r1 = vec![0.0; nodes * n];
    let mut r2 = vec![0.0; nodes * n];
    let mut r3 = vec![0.0; nodes * n];
    let mut r4 = vec![0.0; nodes * m];
    let mut r5 = vec![0.0; nodes * d];
    let sys = &cp.system;
    for i in 1..nodes - 1 {
        let t = g.node(i);
        let (q, u, mu) = (state.q.row(i), state.u.row(i), state.mu.row(i));
        let (p, pa) = (state.p.row(i), state.p_alpha.row(i));
        let phi = sys.velocity(t, q, u);
        let rho = sys.fractional_velocity(t, q, mu);
        let lp = sys.cost_partials(t, q, u, mu);
        let (phi_q, phi_u) = sys.velocity_jacobian(t, q, u).transpose_apply(p);
        let (rho_q, rho_mu) = sys.fractional_jacobian(t, q, mu).transpose_apply(pa);
        for k in 0..n {
            r1[i * n + k] = phi[k] - qdot.value(i, k);
            if d > 0 {
                r2[i * n + k] = rho[k] - cap.value(i, k);
            }
            r3[i * n + k] = lp.dq[k] + phi_q[k] + rho_q[k] + pdot.value(i, k) - rl.value(i, k);
        }
        for k in 0..m {
            r4[i * m + k] = lp.du[k] + phi_u[k];
        }
        for k in 0..d {
            r5[i * d + k] = lp.dmu[k] + rho_mu[k];
        }
    }
    let pack = |dim: usize, v: Vec<f64>, what: &str| -> Result<GridFunction> {
        if let Some(j) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: format!("{what} residual"), index: j / dim.max(1) });
        }
        GridFunction::new(g, dim, v)
    };
    Ok(PontryaginResiduals {
        velocity: pack(n, r1, "velocity")?,
        fractional_velocity: pack(n, r2, "fractional velocity")?,
        costate: pack(n, r3, "costate")?,
        control: pack(m, r4, "control")?,
        fractional_control: pack(d, r5, "fractional control")?,
    })
}

#[derive(Debug, Clone)]
pub struct ControlOptions {
    pub initial_weight: f64,
    pub growth: f64,
    pub rounds: usize,
    /// Gradient max-norm tolerance per round.
    pub tol: f64,
    /// Defaults to `500 · (number of unknowns)` per round.
    pub max_iter: Option<usize>,
}

impl Default for ControlOptions {
    fn default() -> Self {
        ControlOptions { initial_weight: 100.0, growth: 10.0, rounds: 3, tol: 1e-8, max_iter: None }
    }
}

/// Diagnostics of one penalty round.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyRound {
    pub weight: f64,
    /// Max-norm of `φ - q̇` over cells.
    pub velocity_defect: f64,
    /// Max-norm of `ρ - C_a D^α q` over cells.
    pub fractional_defect: f64,
    /// `|q(b) - q_b|` when a terminal condition is set.
    pub terminal_defect: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl PenaltyRound {
    pub fn defect(&self) -> f64 {
        self.velocity_defect.max(self.fractional_defect).max(self.terminal_defect)
    }
}

#[derive(Debug, Clone)]
pub struct ControlSolution {
    pub state: PontryaginState,
    pub rounds: Vec<PenaltyRound>,
    /// Trapezoidal `∫ L(t, q, u, μ)` on the nodes.
    pub cost: f64,
}

impl ControlSolution {
    pub fn final_defect(&self) -> f64 {
        self.rounds.last().map_or(0.0, PenaltyRound::defect)
    }
}

/// Penalized transcription. Unknowns: `q_1..q_N` at nodes, `u`, `μ` at cell
/// midpoints.
struct Transcription<'a> {
    cp: &'a ControlProblem,
    caputo: MidpointCaputo,
    n: usize,
    m: usize,
    d: usize,
    cells: usize,
}

struct Unpacked {
    q: Vec<f64>,
    u: Vec<f64>,
    mu: Vec<f64>,
}

struct CellTerms {
    /// `φ - Δq/h` per cell, node-major.
    vel_defect: Vec<f64>,
    /// `ρ - C q` per cell.
    frac_defect: Vec<f64>,
    cost: Vec<f64>,
}

impl<'a> Transcription<'a> {
    fn new(cp: &'a ControlProblem) -> Self {
        let (n, m, d) = cp.system.dims();
        let cells = cp.grid.intervals();
        let caputo = MidpointCaputo::new(cells, cp.grid.step(), cp.alpha.value());
        Transcription { cp, caputo, n, m, d, cells }
    }

    fn unknowns(&self) -> usize {
        self.cells * (self.n + self.m + self.d)
    }

    fn unpack(&self, x: &[f64]) -> Unpacked {
        let (n, nc) = (self.n, self.cells);
        let mut q = self.cp.q_a.clone();
        q.extend_from_slice(&x[..nc * n]);
        let u = x[nc * n..nc * (n + self.m)].to_vec();
        let mu = x[nc * (n + self.m)..].to_vec();
        Unpacked { q, u, mu }
    }

    fn initial_guess(&self) -> Vec<f64> {
        let (n, nc) = (self.n, self.cells);
        let mut x = vec![0.0; self.unknowns()];
        for j in 1..=nc {
            for k in 0..n {
                let target = self.cp.terminal.as_ref().map_or(self.cp.q_a[k], |b| b[k]);
                let s = j as f64 / nc as f64;
                x[(j - 1) * n + k] = (1.0 - s) * self.cp.q_a[k] + s * target;
            }
        }
        x
    }

    fn midpoint(&self, j: usize) -> f64 {
        self.cp.grid.node(j) + 0.5 * self.cp.grid.step()
    }

    fn cell_terms(&self, z: &Unpacked) -> CellTerms {
        let (n, m, d, nc) = (self.n, self.m, self.d, self.cells);
        let h = self.cp.grid.step();
        let sys = &self.cp.system;
        let capq: Vec<Vec<f64>> = if d > 0 {
            (0..n)
                .map(|k| {
                    let inc: Vec<f64> = (0..nc).map(|j| z.q[(j + 1) * n + k] - z.q[j * n + k]).collect();
                    self.caputo.apply(&inc)
                })
                .collect()
        } else {
            vec![]
        };
        let mut vel_defect = vec![0.0; nc * n];
        let mut frac_defect = vec![0.0; nc * n];
        let mut cost = vec![0.0; nc];
        for j in 0..nc {
            let t = self.midpoint(j);
            let qm: Vec<f64> = (0..n).map(|k| 0.5 * (z.q[j * n + k] + z.q[(j + 1) * n + k])).collect();
            let u = &z.u[j * m..(j + 1) * m];
            let mu = &z.mu[j * d..(j + 1) * d];
            let phi = sys.velocity(t, &qm, u);
            for k in 0..n {
                vel_defect[j * n + k] = phi[k] - (z.q[(j + 1) * n + k] - z.q[j * n + k]) / h;
            }
            if d > 0 {
                let rho = sys.fractional_velocity(t, &qm, mu);
                for k in 0..n {
                    frac_defect[j * n + k] = rho[k] - capq[k][j];
                }
            }
            cost[j] = sys.cost(t, &qm, u, mu);
        }
        CellTerms { vel_defect, frac_defect, cost }
    }

    fn value_and_gradient(&self, x: &[f64], w: f64) -> (f64, Vec<f64>) {
        let (n, m, d, nc) = (self.n, self.m, self.d, self.cells);
        let h = self.cp.grid.step();
        let sys = &self.cp.system;
        let z = self.unpack(x);
        let ct = self.cell_terms(&z);
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        let mut value = h * (ct.cost.iter().sum::<f64>() + 0.5 * w * (sq(&ct.vel_defect) + sq(&ct.frac_defect)));
        // gradient with respect to all nodes, q_0 dropped at the end
        let mut gq = vec![0.0; (nc + 1) * n];
        let mut gu = vec![0.0; nc * m];
        let mut gmu = vec![0.0; nc * d];
        let mut frac_mult = vec![vec![0.0; nc]; n];
        for j in 0..nc {
            let t = self.midpoint(j);
            let qm: Vec<f64> = (0..n).map(|k| 0.5 * (z.q[j * n + k] + z.q[(j + 1) * n + k])).collect();
            let u = &z.u[j * m..(j + 1) * m];
            let mu = &z.mu[j * d..(j + 1) * d];
            let e: Vec<f64> = ct.vel_defect[j * n..(j + 1) * n].iter().map(|x| w * x).collect();
            let g: Vec<f64> = ct.frac_defect[j * n..(j + 1) * n].iter().map(|x| w * x).collect();
            let lp = sys.cost_partials(t, &qm, u, mu);
            let (phi_q, phi_u) = sys.velocity_jacobian(t, &qm, u).transpose_apply(&e);
            let (rho_q, rho_mu) = if d > 0 { sys.fractional_jacobian(t, &qm, mu).transpose_apply(&g) } else { (vec![0.0; n], vec![]) };
            for k in 0..n {
                let avg = h * (lp.dq[k] + phi_q[k] + rho_q[k]);
                gq[j * n + k] += 0.5 * avg + e[k];
                gq[(j + 1) * n + k] += 0.5 * avg - e[k];
                frac_mult[k][j] = g[k];
            }
            for k in 0..m {
                gu[j * m + k] = h * (lp.du[k] + phi_u[k]);
            }
            for k in 0..d {
                gmu[j * d + k] = h * (lp.dmu[k] + rho_mu[k]);
            }
        }
        if d > 0 {
            for (k, mult) in frac_mult.iter().enumerate() {
                // C q_j = Σ_i c_{j,i} (q_{i+1} - q_i)
                let back = self.caputo.apply_transpose(mult);
                for (i, b) in back.iter().enumerate() {
                    gq[(i + 1) * n + k] -= h * b;
                    gq[i * n + k] += h * b;
                }
            }
        }
        if let Some(qb) = &self.cp.terminal {
            for k in 0..n {
                let r = z.q[nc * n + k] - qb[k];
                value += 0.5 * w * r * r;
                gq[nc * n + k] += w * r;
            }
        }
        let mut grad = gq.split_off(n);
        grad.extend(gu);
        grad.extend(gmu);
        (value, grad)
    }

    fn round_summary(&self, x: &[f64], w: f64, iterations: usize, gradient_norm: f64) -> PenaltyRound {
        let z = self.unpack(x);
        let ct = self.cell_terms(&z);
        let amax = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let terminal_defect = self.cp.terminal.as_ref().map_or(0.0, |qb| {
            let last = &z.q[self.cells * self.n..];
            last.iter().zip(qb).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
        });
        PenaltyRound {
            weight: w,
            velocity_defect: amax(&ct.vel_defect),
            fractional_defect: amax(&ct.frac_defect),
            terminal_defect,
            iterations,
            gradient_norm,
        }
    }

    /// Nodal state; costates are the scaled defects `w (φ - q̇)`, `w (ρ - C q)`.
    fn nodal_state(&self, x: &[f64], w: f64) -> Result<PontryaginState> {
        let (n, m, d, nc) = (self.n, self.m, self.d, self.cells);
        let g = self.cp.grid;
        let z = self.unpack(x);
        let ct = self.cell_terms(&z);
        let to_nodes = |cellv: &[f64], dim: usize| -> Vec<f64> {
            let mut out = vec![0.0; (nc + 1) * dim];
            for k in 0..dim {
                let c = |j: usize| cellv[j * dim + k];
                for i in 1..nc {
                    out[i * dim + k] = 0.5 * (c(i - 1) + c(i));
                }
                out[k] = 1.5 * c(0) - 0.5 * c(1);
                out[nc * dim + k] = 1.5 * c(nc - 1) - 0.5 * c(nc - 2);
            }
            out
        };
        let scaled = |v: &[f64]| v.iter().map(|x| w * x).collect::<Vec<f64>>();
        let mut p = to_nodes(&scaled(&ct.vel_defect), n);
        if self.cp.terminal.is_none() {
            // natural condition at a free right end
            for v in &mut p[nc * n..] {
                *v = 0.0;
            }
        }
        let p_alpha = if d > 0 { to_nodes(&scaled(&ct.frac_defect), n) } else { vec![0.0; (nc + 1) * n] };
        Ok(PontryaginState {
            q: GridFunction::new(g, n, z.q)?,
            u: GridFunction::new(g, m, to_nodes(&z.u, m))?,
            mu: GridFunction::new(g, d, if d > 0 { to_nodes(&z.mu, d) } else { vec![] })?,
            p: GridFunction::new(g, n, p)?,
            p_alpha: GridFunction::new(g, n, p_alpha)?,
        })
    }
}

pub fn solve_control(cp: &ControlProblem) -> Result<ControlSolution> {
    solve_control_with(cp, &ControlOptions::default())
}

/// Minimizes cost plus `(w/2) ∫ |φ - q̇|² + |ρ - C_a D^α q|²` for the
/// weights `w_0, w_0 g, ...`, warm-starting each round. A defect that fails
/// to decrease between rounds is reported as [`Error::Infeasible`].
pub fn solve_control_with(cp: &ControlProblem, opts: &ControlOptions) -> Result<ControlSolution> {
    if cp.grid.intervals() > MAX_INTERVALS {
        return Err(Error::InvalidGrid(format!("at most {MAX_INTERVALS} intervals, got {}", cp.grid.intervals())));
    }
    if opts.rounds == 0 || !(opts.initial_weight > 0.0) || !(opts.growth > 1.0) {
        return Err(Error::InvalidArgument("penalty schedule needs rounds >= 1, weight > 0, growth > 1".into()));
    }
    let tr = Transcription::new(cp);
    let mut x = tr.initial_guess();
    let max_iter = opts.max_iter.unwrap_or(500 * tr.unknowns());
    let mopts = MinimizeOptions { tol: opts.tol, max_iter, initial_hessian: InitialHessian::FiniteDifference, ..Default::default() };
    let mut rounds: Vec<PenaltyRound> = Vec::with_capacity(opts.rounds);
    let mut w = opts.initial_weight;
    for _ in 0..opts.rounds {
        let min = minimize(|x| tr.value_and_gradient(x, w), &x, &mopts)?;
        x = min.x;
        let round = tr.round_summary(&x, w, min.iterations, min.gradient_norm);
        if let Some(prev) = rounds.last() {
            if round.defect() >= prev.defect() && prev.defect() > 1e-12 {
                let mut defects: Vec<f64> = rounds.iter().map(PenaltyRound::defect).collect();
                defects.push(round.defect());
                return Err(Error::Infeasible { defects });
            }
        }
        rounds.push(round);
        w *= opts.growth;
    }
    let last_w = rounds.last().expect("at least one round").weight;
    let state = tr.nodal_state(&x, last_w)?;
    let cost = control_cost(cp, &state)?;
    Ok(ControlSolution { state, rounds, cost })
}

/// Trapezoidal `∫ L(t, q, u, μ) dt` over the nodes.
pub fn control_cost(cp: &ControlProblem, state: &PontryaginState) -> Result<f64> {
    state.check(cp)?;
    let l: Vec<f64> = (0..cp.grid.len())
        .map(|i| cp.system.cost(cp.grid.node(i), state.q.row(i), state.u.row(i), state.mu.row(i)))
        .collect();
    if let Some(i) = l.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { what: "cost".into(), index: i });
    }
    Ok(trapezoid(&l, cp.grid.step()))
}

/// `-f₂·p - Σ_r [(-1)^r p_α^(r) I_a^{r+1-α}(f₂ - f₂(a)) + f₂^(r) I_b^{r+1-α} p_α]
///  + τ (H - (1-α) p_α·C_a D^α q)`.
pub fn control_noether_quantity(cp: &ControlProblem, state: &PontryaginState, s: &SymmetryGroup, truncation: usize) -> Result<GridFunction> {
    state.check(cp)?;
    let (n, _, _) = cp.system.dims();
    if s.dim() != n {
        return Err(Error::DimensionMismatch(format!("symmetry acts on dim {}, state has dim {n}", s.dim())));
    }
    let f2 = s.f2_along(&state.q)?;
    let series = transfer_series(&f2, &state.p_alpha, cp.alpha, truncation)?.sum();
    let corrected = corrected_hamiltonian(cp, state)?;
    let out: Vec<f64> = (0..cp.grid.len())
        .map(|i| -dot(f2.row(i), state.p.row(i)) - series[i] + s.tau(cp.grid.node(i)) * corrected[i])
        .collect();
    GridFunction::scalar(cp.grid, out)
}

fn corrected_hamiltonian(cp: &ControlProblem, state: &PontryaginState) -> Result<Vec<f64>> {
    let alpha = cp.alpha.value();
    let cap = state.q.map_components(|c| caputo_left_slice(c, cp.grid.step(), alpha))?;
    Ok((0..cp.grid.len())
        .map(|i| hamiltonian_at(cp, state, i) - (1.0 - alpha) * dot(state.p_alpha.row(i), cap.row(i)))
        .collect())
}

/// `H - (1-α) p_α·C_a D^α q` for time-independent problems.
pub fn autonomous_control_quantity(cp: &ControlProblem, state: &PontryaginState) -> Result<GridFunction> {
    if !cp.system.is_autonomous() {
        return Err(Error::InvalidArgument("autonomous_control_quantity needs a time-independent problem".into()));
    }
    state.check(cp)?;
    GridFunction::scalar(cp.grid, corrected_hamiltonian(cp, state)?)
}

/// `H` at every node.
pub fn hamiltonian_along(cp: &ControlProblem, state: &PontryaginState) -> Result<GridFunction> {
    state.check(cp)?;
    GridFunction::scalar(cp.grid, (0..cp.grid.len()).map(|i| hamiltonian_at(cp, state, i)).collect())
}

/// CSV `t,q,u,mu,p,p_alpha,H,invariant`, components suffixed when dim > 1;
/// `invariant` is `H - (1-α) p_α·C_a D^α q`.
pub fn write_control_csv<W: Write>(cp: &ControlProblem, state: &PontryaginState, w: W) -> Result<()> {
    state.check(cp)?;
    let mut header = vec!["t".to_string()];
    let mut cols = vec![cp.grid.nodes()];
    for (name, gf) in [("q", &state.q), ("u", &state.u), ("mu", &state.mu), ("p", &state.p), ("p_alpha", &state.p_alpha)] {
        for k in 0..gf.dim() {
            header.push(if gf.dim() == 1 { name.to_string() } else { format!("{name}{k}") });
            cols.push(gf.component(k));
        }
    }
    header.push("H".into());
    cols.push(hamiltonian_along(cp, state)?.component(0));
    header.push("invariant".into());
    cols.push(corrected_hamiltonian(cp, state)?);
    write_table(w, &header, &cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variational::{Free, QuadraticForm};

    fn ord(a: f64) -> FractionalOrder {
        FractionalOrder::derivative(a).unwrap()
    }

    fn zero_system() -> ControlSpec {
        ControlSpec::new(PolynomialControl {
            dim: 1,
            fractional: true,
            cost_q: Polynomial::default(),
            cost_u: Polynomial::default(),
            cost_mu: Polynomial::default(),
            velocity_q: Polynomial::default(),
            velocity_u: 0.0,
            fractional_q: Polynomial::default(),
            fractional_mu: 0.0,
        })
        .unwrap()
    }

    #[test]
    fn zero_problem_has_zero_residuals() {
        let g = Grid::new(0.0, 1.0, 16).unwrap();
        let cp = ControlProblem::new(zero_system(), ord(0.5), g, vec![0.0]).unwrap();
        let z = GridFunction::zeros(g, 1);
        let st = PontryaginState { q: z.clone(), u: z.clone(), mu: z.clone(), p: z.clone(), p_alpha: z };
        assert_eq!(pontryagin_residuals(&cp, &st).unwrap().norms(), [0.0; 5]);
    }

    #[test]
    fn reduced_hamiltonian_expands() {
        let l = LagrangianSpec::new(QuadraticForm { dim: 1, vv: 1.0, ..Default::default() }).unwrap();
        let g = Grid::new(0.0, 1.0, 4).unwrap();
        let cp = ControlProblem::new(ControlSpec::new(ReducedVariational { lagrangian: l }).unwrap(), ord(0.5), g, vec![0.0]).unwrap();
        let c = |x: f64| GridFunction::from_fn(g, move |_| x).unwrap();
        let st = PontryaginState { q: c(0.3), u: c(2.0), mu: c(-1.0), p: c(0.5), p_alpha: c(4.0) };
        assert_eq!(hamiltonian(&cp, &st, 2).unwrap(), 2.0 + 0.5 * 2.0 - 4.0);
        let st0 = PontryaginState { p: c(0.0), p_alpha: c(0.0), ..st };
        assert_eq!(hamiltonian(&cp, &st0, 2).unwrap(), 2.0);
    }

    #[test]
    fn velocity_residual_is_direct_difference() {
        let l = LagrangianSpec::new(Free { dim: 1, mass: 1.0 }).unwrap();
        let g = Grid::new(0.0, 1.0, 8).unwrap();
        let cp = ControlProblem::new(ControlSpec::new(ReducedVariational { lagrangian: l }).unwrap(), ord(1.0), g, vec![0.0]).unwrap();
        let q = GridFunction::from_fn(g, |t| t * t).unwrap();
        let u = GridFunction::from_fn(g, |t| 3.0 - t).unwrap();
        let z = GridFunction::zeros(g, 1);
        let st = PontryaginState { q, u, mu: z.clone(), p: z.clone(), p_alpha: z };
        let r = pontryagin_residuals(&cp, &st).unwrap();
        for i in 1..8 {
            let t = g.node(i);
            assert!((r.velocity.value(i, 0) - (3.0 - t - 2.0 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_jacobian_rejected() {
        #[derive(Debug)]
        struct Bad;
        impl ControlSystem for Bad {
            fn dims(&self) -> (usize, usize, usize) {
                (1, 1, 0)
            }
            fn cost(&self, _t: f64, _q: &[f64], u: &[f64], _mu: &[f64]) -> f64 {
                u[0] * u[0]
            }
            fn velocity(&self, _t: f64, q: &[f64], u: &[f64]) -> Vec<f64> {
                vec![q[0] * u[0]]
            }
            fn fractional_velocity(&self, _t: f64, _q: &[f64], _mu: &[f64]) -> Vec<f64> {
                vec![]
            }
            fn velocity_jacobian(&self, _t: f64, _q: &[f64], u: &[f64]) -> Option<Jacobian> {
                Some(Jacobian { state: vec![u[0]], control: vec![1.0] })
            }
            fn is_autonomous(&self) -> bool {
                true
            }
        }
        assert!(matches!(ControlSpec::new(Bad), Err(Error::PartialsMismatch(_))));
    }

    #[test]
    fn transcription_gradient_matches_finite_differences() {
        let sys = ControlSpec::new(PolynomialControl {
            dim: 1,
            fractional: true,
            cost_q: Polynomial::new(vec![0.0, 0.1, 0.5]),
            cost_u: Polynomial::new(vec![0.0, 0.0, 0.5]),
            cost_mu: Polynomial::new(vec![0.0, 0.0, 0.5]),
            velocity_q: Polynomial::new(vec![0.0, -0.3, 0.2]),
            velocity_u: 1.0,
            fractional_q: Polynomial::new(vec![0.0, 0.4]),
            fractional_mu: 1.0,
        })
        .unwrap();
        let g = Grid::new(0.0, 1.0, 8).unwrap();
        let cp = ControlProblem::new(sys, ord(0.6), g, vec![0.5]).unwrap().with_terminal(vec![1.0]).unwrap();
        let tr = Transcription::new(&cp);
        let x: Vec<f64> = (0..tr.unknowns()).map(|i| (0.7 * i as f64).sin()).collect();
        let (_, grad) = tr.value_and_gradient(&x, 3.0);
        let mut y = x.clone();
        for k in 0..x.len() {
            let s = 1e-6;
            y[k] = x[k] + s;
            let up = tr.value_and_gradient(&y, 3.0).0;
            y[k] = x[k] - s;
            let down = tr.value_and_gradient(&y, 3.0).0;
            y[k] = x[k];
            let fd = (up - down) / (2.0 * s);
            assert!((grad[k] - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{k}: {} vs {fd}", grad[k]);
        }
    }

    #[test]
    fn zero_cost_control_stays_at_rest() {
        let sys = ControlSpec::new(PolynomialControl { cost_u: Polynomial::new(vec![0.0, 0.0, 1.0]), ..PolynomialControl::linear_quadratic(0.0, 0.0, 0.0, 1.0) }).unwrap();
        let cp = ControlProblem::new(sys, ord(1.0), Grid::new(0.0, 1.0, 32).unwrap(), vec![0.0]).unwrap();
        let sol = solve_control(&cp).unwrap();
        assert!(sol.state.q.max_norm() < 1e-10 && sol.state.u.max_norm() < 1e-10);
    }
}
