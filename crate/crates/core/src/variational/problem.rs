use crate::calculus::{central_diff, trapezoid};
use crate::error::{Error, Result};
use crate::fracops::{caputo_left_slice, rl_derivative_right_slice, FractionalOrder};
use crate::grid::{Grid, GridFunction};

use super::lagrangian::LagrangianSpec;

/// Fixed-endpoint problem: make `∫_a^b L(t, q, q̇, C_a D^α q) dt` stationary
/// subject to `q(a) = q_a`, `q(b) = q_b`.
#[derive(Debug, Clone)]
pub struct VariationalProblem {
    lagrangian: LagrangianSpec,
    grid: Grid,
    alpha: FractionalOrder,
    q_a: Vec<f64>,
    q_b: Vec<f64>,
}

/// Everything the Lagrangian sees along a sampled trajectory.
#[derive(Debug, Clone)]
pub struct Sampled {
    /// Central-difference velocity.
    pub velocity: GridFunction,
    /// Left Caputo derivative (L1).
    pub caputo: GridFunction,
    pub lagrangian: Vec<f64>,
    pub dq: GridFunction,
    pub dv: GridFunction,
    pub dw: GridFunction,
}

impl VariationalProblem {
    pub fn new(
        lagrangian: LagrangianSpec,
        grid: Grid,
        alpha: FractionalOrder,
        q_a: Vec<f64>,
        q_b: Vec<f64>,
    ) -> Result<Self> {
        let alpha = FractionalOrder::derivative(alpha.value())?;
        let d = lagrangian.dim();
        if q_a.len() != d || q_b.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "boundary values have {} and {} components, Lagrangian dimension is {d}",
                q_a.len(),
                q_b.len()
            )));
        }
        if q_a.iter().chain(&q_b).any(|x| !x.is_finite()) {
            return Err(Error::Boundary("boundary values must be finite".into()));
        }
        Ok(VariationalProblem { lagrangian, grid, alpha, q_a, q_b })
    }

    pub fn lagrangian(&self) -> &LagrangianSpec {
        &self.lagrangian
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn alpha(&self) -> FractionalOrder {
        self.alpha
    }

    pub fn q_a(&self) -> &[f64] {
        &self.q_a
    }

    pub fn q_b(&self) -> &[f64] {
        &self.q_b
    }

    pub fn dim(&self) -> usize {
        self.lagrangian.dim()
    }

    /// Same problem on a grid with `n` intervals.
    pub fn with_intervals(&self, n: usize) -> Result<Self> {
        Self::new(self.lagrangian.clone(), self.grid.refined(n)?, self.alpha, self.q_a.clone(), self.q_b.clone())
    }

    /// Linear interpolation of the boundary values.
    pub fn linear_guess(&self) -> GridFunction {
        let (a, b) = (self.grid.a(), self.grid.b());
        let d = self.dim();
        GridFunction::from_fn_vec(self.grid, d, |t| {
            let s = (t - a) / (b - a);
            (0..d).map(|k| (1.0 - s) * self.q_a[k] + s * self.q_b[k]).collect()
        })
        .expect("finite boundary values")
    }

    pub(crate) fn check_on_grid(&self, q: &GridFunction) -> Result<()> {
        if *q.grid() != self.grid || q.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "trajectory on {:?} with dim {}, problem on {:?} with dim {}",
                q.grid(),
                q.dim(),
                self.grid,
                self.dim()
            )));
        }
        if let Some(i) = q.first_flagged() {
            return Err(Error::NonFinite { what: "trajectory".into(), index: i });
        }
        Ok(())
    }

    fn check_boundary(&self, q: &GridFunction) -> Result<()> {
        let last = q.len() - 1;
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * (1.0 + y.abs());
        let ok = q.row(0).iter().zip(&self.q_a).all(|(x, y)| close(*x, *y))
            && q.row(last).iter().zip(&self.q_b).all(|(x, y)| close(*x, *y));
        if !ok {
            return Err(Error::Boundary(format!(
                "trajectory endpoints {:?}, {:?} differ from {:?}, {:?}",
                q.row(0),
                q.row(last),
                self.q_a,
                self.q_b
            )));
        }
        Ok(())
    }

    /// Samples velocity, Caputo derivative, `L` and its partials along `q`.
    pub fn sample(&self, q: &GridFunction) -> Result<Sampled> {
        self.check_on_grid(q)?;
        let h = self.grid.step();
        let alpha = self.alpha.value();
        let velocity = q.map_components(|c| central_diff(c, h))?;
        let caputo = q.map_components(|c| caputo_left_slice(c, h, alpha))?;
        let n = q.len();
        let d = self.dim();
        let mut lagrangian = Vec::with_capacity(n);
        let (mut dq, mut dv, mut dw) = (Vec::with_capacity(n * d), Vec::with_capacity(n * d), Vec::with_capacity(n * d));
        for i in 0..n {
            let t = self.grid.node(i);
            let (qi, vi, wi) = (q.row(i), velocity.row(i), caputo.row(i));
            let l = self.lagrangian.value(t, qi, vi, wi);
            if !l.is_finite() {
                return Err(Error::NonFinite { what: "Lagrangian".into(), index: i });
            }
            lagrangian.push(l);
            let p = self.lagrangian.partials(t, qi, vi, wi);
            if p.dq.iter().chain(&p.dv).chain(&p.dw).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { what: "Lagrangian partials".into(), index: i });
            }
            dq.extend(p.dq);
            dv.extend(p.dv);
            dw.extend(p.dw);
        }
        Ok(Sampled {
            velocity,
            caputo,
            lagrangian,
            dq: GridFunction::new(self.grid, d, dq)?,
            dv: GridFunction::new(self.grid, d, dv)?,
            dw: GridFunction::new(self.grid, d, dw)?,
        })
    }

    /// Trapezoidal value of the action along `q`.
    pub fn action_value(&self, q: &GridFunction) -> Result<f64> {
        self.check_on_grid(q)?;
        self.check_boundary(q)?;
        let s = self.sample(q)?;
        Ok(trapezoid(&s.lagrangian, self.grid.step()))
    }

    /// `∫ ∂₂L·h + ∂₃L·ḣ + ∂₄L·C_a D^α h dt` along `q`, for `h` vanishing at
    /// both ends. This is the exact derivative of [`Self::action_value`]
    /// in the direction `h`.
    pub fn frechet_differential(&self, q: &GridFunction, h: &GridFunction) -> Result<f64> {
        self.check_on_grid(q)?;
        self.check_on_grid(h)?;
        let last = h.len() - 1;
        if h.row(0).iter().chain(h.row(last)).any(|&x| x != 0.0) {
            return Err(Error::Boundary("variation must vanish at both endpoints".into()));
        }
        let s = self.sample(q)?;
        let step = self.grid.step();
        let alpha = self.alpha.value();
        let mut total = 0.0;
        for k in 0..self.dim() {
            let hk = h.component(k);
            let hdot = central_diff(&hk, step);
            let hcap = caputo_left_slice(&hk, step, alpha);
            let integrand: Vec<f64> = (0..h.len())
                .map(|i| s.dq.value(i, k) * hk[i] + s.dv.value(i, k) * hdot[i] + s.dw.value(i, k) * hcap[i])
                .collect();
            total += trapezoid(&integrand, step);
        }
        Ok(total)
    }

    /// `∂₂L - d/dt ∂₃L + RL_b D^α ∂₄L` at interior nodes; zero at the ends.
    pub fn el_residual(&self, q: &GridFunction) -> Result<GridFunction> {
        let s = self.sample(q)?;
        self.el_residual_from(&s)
    }

    pub(crate) fn el_residual_from(&self, s: &Sampled) -> Result<GridFunction> {
        let h = self.grid.step();
        let alpha = self.alpha.value();
        let n = self.grid.len();
        let mut cols = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let ddv = central_diff(&s.dv.component(k), h);
            let rl = rl_derivative_right_slice(&s.dw.component(k), h, alpha);
            let mut r = vec![0.0; n];
            for i in 1..n - 1 {
                r[i] = s.dq.value(i, k) - ddv[i] + rl[i];
            }
            if let Some(i) = r.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { what: "Euler-Lagrange residual".into(), index: i });
            }
            cols.push(r);
        }
        GridFunction::from_columns(self.grid, &cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variational::lagrangian::{Free, Harmonic, QuadraticForm};
    use std::f64::consts::PI;

    fn problem(l: LagrangianSpec, a: f64, b: f64, n: usize, alpha: f64, qa: f64, qb: f64) -> VariationalProblem {
        VariationalProblem::new(
            l,
            Grid::new(a, b, n).unwrap(),
            FractionalOrder::derivative(alpha).unwrap(),
            vec![qa],
            vec![qb],
        )
        .unwrap()
    }

    #[test]
    fn boundary_dimension_checked() {
        let l = LagrangianSpec::new(Free { dim: 2, mass: 1.0 }).unwrap();
        let r = VariationalProblem::new(l, Grid::new(0.0, 1.0, 8).unwrap(), FractionalOrder::derivative(1.0).unwrap(), vec![0.0], vec![1.0, 1.0]);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn action_of_free_particle() {
        let p = problem(LagrangianSpec::new(Free { dim: 1, mass: 1.0 }).unwrap(), 0.0, 1.0, 64, 1.0, 0.0, 1.0);
        let q = p.linear_guess();
        assert!((p.action_value(&q).unwrap() - 0.5).abs() < 1e-13);
    }

    #[test]
    fn action_of_constant_trajectory() {
        let l = QuadraticForm { dim: 1, vv: 1.0, ww: 1.0, w: 0.3, v: 2.0, ..Default::default() };
        let p = problem(LagrangianSpec::new(l).unwrap(), 0.0, 2.0, 16, 0.5, 1.5, 1.5);
        let q = p.linear_guess();
        // L(t, q, 0, 0) = 0 here
        assert_eq!(p.action_value(&q).unwrap(), 0.0);
    }

    #[test]
    fn action_rejects_wrong_boundary() {
        let p = problem(LagrangianSpec::new(Free { dim: 1, mass: 1.0 }).unwrap(), 0.0, 1.0, 8, 1.0, 0.0, 1.0);
        let q = GridFunction::from_fn(*p.grid(), |t| 2.0 * t).unwrap();
        assert!(matches!(p.action_value(&q), Err(Error::Boundary(_))));
    }

    #[test]
    fn frechet_zero_direction_and_endpoint_check() {
        let p = problem(LagrangianSpec::new(Free { dim: 1, mass: 1.0 }).unwrap(), 0.0, 1.0, 32, 0.5, 0.0, 1.0);
        let q = p.linear_guess();
        let zero = GridFunction::zeros(*p.grid(), 1);
        assert_eq!(p.frechet_differential(&q, &zero).unwrap(), 0.0);
        let bad = GridFunction::from_fn(*p.grid(), |t| t).unwrap();
        assert!(matches!(p.frechet_differential(&q, &bad), Err(Error::Boundary(_))));
    }

    #[test]
    fn frechet_free_particle_along_line() {
        let p = problem(LagrangianSpec::new(Free { dim: 1, mass: 1.0 }).unwrap(), 0.0, 1.0, 512, 1.0, 0.0, 1.0);
        let q = p.linear_guess();
        let mut v: Vec<f64> = p.grid().nodes().iter().map(|t| (PI * t).sin()).collect();
        v[0] = 0.0;
        v[512] = 0.0;
        let h = GridFunction::scalar(*p.grid(), v).unwrap();
        assert!(p.frechet_differential(&q, &h).unwrap().abs() < 1e-6);
    }

    #[test]
    fn harmonic_el_residual_is_second_order() {
        let n = 256;
        let p = problem(
            LagrangianSpec::new(Harmonic { dim: 1, mass: 1.0, stiffness: 1.0 }).unwrap(),
            0.0,
            PI / 2.0,
            n,
            1.0,
            1.0,
            0.0,
        );
        let q = GridFunction::from_fn(*p.grid(), f64::cos).unwrap();
        let r = p.el_residual(&q).unwrap();
        let h = p.grid().step();
        assert!(r.max_norm() < 20.0 * h * h, "{}", r.max_norm());
        assert_eq!(r.value(0, 0), 0.0);
        assert_eq!(r.value(n, 0), 0.0);
    }

    #[test]
    fn el_residual_of_q_independent_linear() {
        let p = problem(LagrangianSpec::new(Free { dim: 1, mass: 3.0 }).unwrap(), 0.0, 1.0, 64, 1.0, -1.0, 2.0);
        let q = p.linear_guess();
        assert!(p.el_residual(&q).unwrap().max_norm() < 1e-10);
    }
}
