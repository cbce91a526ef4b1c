//! Direct transcription of the action.
//!
//! The solver minimizes a cell-based discretization: on each cell
//! `[t_j, t_{j+1}]` the Lagrangian is evaluated once at the midpoint with
//! the averaged state, the difference quotient as velocity, and the Caputo
//! derivative of the piecewise-linear interpolant evaluated exactly at the
//! midpoint. Nodal central differences would leave the odd and even nodes
//! coupled only through the boundary formulas.

use crate::error::Result;
use crate::gamma::gamma;
use crate::grid::GridFunction;

use super::problem::VariationalProblem;

/// Caputo derivative of a piecewise-linear function at cell midpoints, as a
/// lower-triangular Toeplitz map from the increments `Δq_k = q_{k+1} - q_k`.
#[derive(Debug, Clone)]
pub(crate) struct MidpointCaputo {
    weights: Vec<f64>,
    scale: f64,
}

impl MidpointCaputo {
    pub(crate) fn new(cells: usize, h: f64, alpha: f64) -> Self {
        let e = 1.0 - alpha;
        let weights = (0..cells)
            .map(|k| {
                if k == 0 {
                    0.5f64.powf(e)
                } else {
                    (k as f64 + 0.5).powf(e) - (k as f64 - 0.5).powf(e)
                }
            })
            .collect();
        MidpointCaputo { weights, scale: h.powf(-alpha) / gamma(2.0 - alpha) }
    }

    pub(crate) fn apply(&self, dq: &[f64]) -> Vec<f64> {
        let n = dq.len();
        let mut out = vec![0.0; n];
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..=j {
                s += self.weights[j - k] * dq[k];
            }
            out[j] = self.scale * s;
        }
        out
    }

    pub(crate) fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let mut out = vec![0.0; n];
        for k in 0..n {
            let mut s = 0.0;
            for j in k..n {
                s += self.weights[j - k] * y[j];
            }
            out[k] = self.scale * s;
        }
        out
    }
}

/// The cell-midpoint discrete action of a [`VariationalProblem`] and its
/// exact gradient with respect to the interior node values.
#[derive(Debug)]
pub struct TranscribedAction<'a> {
    problem: &'a VariationalProblem,
    caputo: MidpointCaputo,
}

impl<'a> TranscribedAction<'a> {
    pub fn new(problem: &'a VariationalProblem) -> Self {
        let g = problem.grid();
        let caputo = MidpointCaputo::new(g.intervals(), g.step(), problem.alpha().value());
        TranscribedAction { problem, caputo }
    }

    /// Interior node values, node-major.
    pub fn interior(&self, q: &GridFunction) -> Vec<f64> {
        let d = self.problem.dim();
        q.values()[d..q.values().len() - d].to_vec()
    }

    /// Full trajectory from interior values and the problem's boundary data.
    pub fn assemble(&self, x: &[f64]) -> Result<GridFunction> {
        let mut values = Vec::with_capacity(x.len() + 2 * self.problem.dim());
        values.extend_from_slice(self.problem.q_a());
        values.extend_from_slice(x);
        values.extend_from_slice(self.problem.q_b());
        GridFunction::with_flags(*self.problem.grid(), self.problem.dim(), values)
    }

    pub fn value(&self, q: &GridFunction) -> Result<f64> {
        self.problem.check_on_grid(q)?;
        Ok(self.evaluate(q.values(), false).0)
    }

    /// Gradient with respect to every node value (endpoints included).
    pub fn gradient(&self, q: &GridFunction) -> Result<GridFunction> {
        self.problem.check_on_grid(q)?;
        let (_, g) = self.evaluate(q.values(), true);
        GridFunction::with_flags(*q.grid(), q.dim(), g)
    }

    /// Objective and interior gradient for the minimizer.
    pub(crate) fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let d = self.problem.dim();
        let mut full = Vec::with_capacity(x.len() + 2 * d);
        full.extend_from_slice(self.problem.q_a());
        full.extend_from_slice(x);
        full.extend_from_slice(self.problem.q_b());
        let (v, g) = self.evaluate(&full, true);
        (v, g[d..g.len() - d].to_vec())
    }

    fn evaluate(&self, q: &[f64], with_gradient: bool) -> (f64, Vec<f64>) {
        let p = self.problem;
        let d = p.dim();
        let grid = p.grid();
        let cells = grid.intervals();
        let h = grid.step();
        let l = p.lagrangian();
        // midpoint Caputo per component
        let mut wmid = vec![0.0; cells * d];
        for k in 0..d {
            let dq: Vec<f64> = (0..cells).map(|j| q[(j + 1) * d + k] - q[j * d + k]).collect();
            for (j, w) in self.caputo.apply(&dq).into_iter().enumerate() {
                wmid[j * d + k] = w;
            }
        }
        let mut total = 0.0;
        let mut grad = if with_gradient { vec![0.0; q.len()] } else { Vec::new() };
        let mut ydw = if with_gradient { vec![0.0; cells * d] } else { Vec::new() };
        let mut qm = vec![0.0; d];
        let mut vm = vec![0.0; d];
        for j in 0..cells {
            let t = grid.a() + (j as f64 + 0.5) * h;
            for k in 0..d {
                qm[k] = 0.5 * (q[j * d + k] + q[(j + 1) * d + k]);
                vm[k] = (q[(j + 1) * d + k] - q[j * d + k]) / h;
            }
            let wm = &wmid[j * d..(j + 1) * d];
            total += h * l.value(t, &qm, &vm, wm);
            if with_gradient {
                let pr = l.partials(t, &qm, &vm, wm);
                for k in 0..d {
                    let gq = 0.5 * h * pr.dq[k];
                    grad[j * d + k] += gq - pr.dv[k];
                    grad[(j + 1) * d + k] += gq + pr.dv[k];
                    ydw[j * d + k] = h * pr.dw[k];
                }
            }
        }
        if with_gradient {
            for k in 0..d {
                let y: Vec<f64> = (0..cells).map(|j| ydw[j * d + k]).collect();
                for (j, z) in self.caputo.apply_transpose(&y).into_iter().enumerate() {
                    grad[(j + 1) * d + k] += z;
                    grad[j * d + k] -= z;
                }
            }
        }
        (total, grad)
    }
}
