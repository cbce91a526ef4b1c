use std::io::Write;

use crate::calculus::central_diff;
use crate::error::{Error, Result};
use crate::fracops::caputo_left_slice;
use crate::grid::{write_table, GridFunction};
use crate::optimize::{minimize, InitialHessian, MinimizeOptions};

use super::problem::VariationalProblem;
use super::transcription::TranscribedAction;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Gradient max-norm tolerance on the transcribed action.
    pub tol: f64,
    /// Defaults to `500 * dim * n`.
    pub max_iter: Option<usize>,
    pub initial_hessian: InitialHessian,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, max_iter: None, initial_hessian: InitialHessian::FiniteDifference }
    }
}

/// A discrete extremal with its diagnostics.
#[derive(Debug, Clone)]
pub struct ExtremalSolution {
    pub trajectory: GridFunction,
    pub velocity: GridFunction,
    pub caputo_velocity: GridFunction,
    /// Trapezoidal action (see [`VariationalProblem::action_value`]).
    pub action: f64,
    pub el_residual: GridFunction,
    /// Max-norm of the Euler-Lagrange residual over interior nodes.
    pub el_residual_norm: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl ExtremalSolution {
    /// Builds the diagnostics for an arbitrary trajectory of `p`.
    pub fn evaluate(p: &VariationalProblem, q: GridFunction, iterations: usize, gradient_norm: f64) -> Result<Self> {
        let h = p.grid().step();
        let alpha = p.alpha().value();
        let velocity = q.map_components(|c| central_diff(c, h))?;
        let caputo_velocity = q.map_components(|c| caputo_left_slice(c, h, alpha))?;
        let action = p.action_value(&q)?;
        let el_residual = p.el_residual(&q)?;
        let el_residual_norm = el_residual.max_norm();
        Ok(ExtremalSolution {
            trajectory: q,
            velocity,
            caputo_velocity,
            action,
            el_residual,
            el_residual_norm,
            iterations,
            gradient_norm,
        })
    }

    /// CSV `t,q,qdot,caputo_q,el_residual` (components suffixed when dim > 1).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let d = self.trajectory.dim();
        let names = |base: &str| -> Vec<String> {
            if d == 1 { vec![base.to_string()] } else { (0..d).map(|k| format!("{base}{k}")).collect() }
        };
        let mut header = vec!["t".to_string()];
        let mut cols = vec![self.trajectory.grid().nodes()];
        for (base, gf) in [
            ("q", &self.trajectory),
            ("qdot", &self.velocity),
            ("caputo_q", &self.caputo_velocity),
            ("el_residual", &self.el_residual),
        ] {
            header.extend(names(base));
            cols.extend(gf.columns());
        }
        write_table(w, &header, &cols)
    }
}

pub fn solve_extremal(p: &VariationalProblem, init: Option<&GridFunction>) -> Result<ExtremalSolution> {
    solve_extremal_with(p, init, &SolveOptions::default())
}

/// Minimizes the transcribed action over the interior node values with the
/// endpoints pinned to the boundary data.
pub fn solve_extremal_with(
    p: &VariationalProblem,
    init: Option<&GridFunction>,
    opts: &SolveOptions,
) -> Result<ExtremalSolution> {
    let guess = match init {
        Some(q) => {
            p.check_on_grid(q)?;
            let last = q.len() - 1;
            if q.row(0) != p.q_a() || q.row(last) != p.q_b() {
                return Err(Error::Boundary("initial guess must match the boundary values".into()));
            }
            q.clone()
        }
        None => p.linear_guess(),
    };
    let action = TranscribedAction::new(p);
    let x0 = action.interior(&guess);
    let max_iter = opts.max_iter.unwrap_or(500 * p.dim() * p.grid().intervals());
    let mopts = MinimizeOptions { tol: opts.tol, max_iter, initial_hessian: opts.initial_hessian, ..Default::default() };
    let min = minimize(|x| action.value_and_gradient(x), &x0, &mopts)?;
    let q = action.assemble(&min.x)?;
    let q = GridFunction::new(*q.grid(), q.dim(), q.values().to_vec())?;
    ExtremalSolution::evaluate(p, q, min.iterations, min.gradient_norm)
}
