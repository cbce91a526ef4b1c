//! Dense BFGS minimizer used by the direct-transcription solvers.
//!
//! The initial inverse Hessian is either a scaled identity or the inverse of
//! a finite-difference Hessian (differences of the analytic gradient). The
//! latter makes quadratic objectives converge in a single step and copes with
//! the stiff penalty objectives of the control solver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialHessian {
    Identity,
    FiniteDifference,
}

#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    /// Stop when the gradient max-norm falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub initial_hessian: InitialHessian,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions { tol: 1e-8, max_iter: 10_000, max_halvings: 60, initial_hessian: InitialHessian::FiniteDifference }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn fd_hessian<F>(f: &mut F, x: &[f64]) -> DMatrix<f64>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x.len();
    let mut hess = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let step = 1e-5 * (1.0 + x[j].abs());
        xp[j] = x[j] + step;
        let (_, gp) = f(&xp);
        xp[j] = x[j] - step;
        let (_, gm) = f(&xp);
        xp[j] = x[j];
        for i in 0..n {
            hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    (&hess + hess.transpose()) * 0.5
}

/// Inverse of a symmetric matrix that is positive definite after at most a
/// few diagonal shifts; `None` otherwise.
fn spd_inverse(mut hess: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = hess.nrows();
    let scale = (0..n).fold(0.0f64, |m, i| m.max(hess[(i, i)].abs())).max(1e-300);
    let mut shift = 0.0;
    for _ in 0..8 {
        if let Some(chol) = hess.clone().cholesky() {
            return Some(chol.inverse());
        }
        let next = if shift == 0.0 { 1e-10 * scale } else { shift * 100.0 };
        for i in 0..n {
            hess[(i, i)] += next - shift;
        }
        shift = next;
    }
    None
}

/// Minimizes `f`, which returns the objective and its gradient.
///
/// Non-finite trial values shrink the step; after `max_halvings` halvings
/// without an acceptable point the search fails with [`Error::LineSearch`].
/// Running out of iterations yields [`Error::NotConverged`].
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &MinimizeOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let (mut fx, g0) = f(x0);
    if !fx.is_finite() || g0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "objective at the initial point".into(), index: 0 });
    }
    let mut g = DVector::from_vec(g0);
    if n == 0 {
        return Ok(Minimum { x: vec![], value: fx, gradient_norm: 0.0, iterations: 0 });
    }
    let identity = |gn: f64| DMatrix::<f64>::identity(n, n) * (1.0 / gn.max(1.0));
    let mut hinv = match opts.initial_hessian {
        InitialHessian::Identity => identity(g.amax()),
        InitialHessian::FiniteDifference => {
            spd_inverse(fd_hessian(&mut f, x.as_slice())).unwrap_or_else(|| identity(g.amax()))
        }
    };
    let mut fresh = true;
    for iter in 0..opts.max_iter {
        let gnorm = g.amax();
        if gnorm < opts.tol {
            return Ok(Minimum { x: x.as_slice().to_vec(), value: fx, gradient_norm: gnorm, iterations: iter });
        }
        let mut d = -(&hinv * &g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            hinv = identity(gnorm);
            d = -(&hinv * &g);
            slope = g.dot(&d);
        }
        let mut step = 1.0;
        let mut halvings = 0;
        let (x_new, f_new, g_new) = loop {
            let trial = &x + &d * step;
            let moved = trial != x;
            let (ft, gt) = if moved { f(trial.as_slice()) } else { (f64::NAN, vec![]) };
            let finite = moved && ft.is_finite() && gt.iter().all(|v| v.is_finite());
            if finite {
                let armijo = ft <= fx + 1e-4 * step * slope;
                // at round-off level the objective stops resolving progress;
                // fall back to the gradient
                let noise = 1e-13 * (1.0 + fx.abs());
                let flat = ft <= fx + noise && max_norm(&gt) < gnorm;
                if armijo || flat {
                    break (trial, ft, DVector::from_vec(gt));
                }
            }
            halvings += 1;
            if halvings > opts.max_halvings {
                if !fresh {
                    // retry once from a steepest-descent model
                    hinv = identity(gnorm);
                    fresh = true;
                    d = -(&hinv * &g);
                    slope = g.dot(&d);
                    step = 1.0;
                    halvings = 0;
                    continue;
                }
                return Err(Error::LineSearch { halvings: opts.max_halvings, gradient_norm: gnorm });
            }
            step *= 0.5;
        };
        fresh = false;
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-14 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - ρ(s (Hy)ᵀ + (Hy) sᵀ) + (ρ² yᵀHy + ρ) s sᵀ
            hinv.ger(-rho, &s, &hy, 1.0);
            hinv.ger(-rho, &hy, &s, 1.0);
            hinv.ger(rho * rho * yhy + rho, &s, &s, 1.0);
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    let gnorm = g.amax();
    if gnorm < opts.tol {
        return Ok(Minimum { x: x.as_slice().to_vec(), value: fx, gradient_norm: gnorm, iterations: opts.max_iter });
    }
    Err(Error::NotConverged { iterations: opts.max_iter, gradient_norm: gnorm })
}
