//! Validated scenario setups and their runs.

use fracnoether::fracops::{caputo_left, caputo_right, rl_derivative_left, rl_derivative_right, rl_integral_left, rl_integral_right};
use fracnoether::friction::{friction_diagnostics, nested_windows, simulate_damped_eom, window_shrink_study, FrictionProblem};
use fracnoether::gamma::recip_gamma;
use fracnoether::grid::write_table;
use fracnoether::noether::{drift_report, invariance_defect, invariance_necessary_residual, noether_quantity, SymmetryGroup, DEFAULT_TRUNCATION};
use fracnoether::optctrl::{
    autonomous_control_quantity, hamiltonian_along, solve_control_with, write_control_csv, ControlOptions, ControlProblem, ControlSpec,
    PolynomialControl,
};
use fracnoether::variational::{
    solve_extremal_with, ExtremalSolution, Free, Harmonic, LagrangianSpec, Polynomial, PotentialPolynomial, QuadraticForm, SolveOptions,
    VariationalProblem,
};
use fracnoether::{FractionalOrder, Grid, GridFunction};

use crate::config::{check_alpha, check_intervals, check_positive, state_vector, Kind, Params, Scenario};
use crate::error::{CliError, Context};

/// Command-line settings that take precedence over the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub truncation: Option<usize>,
    pub tol: Option<f64>,
}

/// A named output file held in memory until it is written.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

fn table(name: &str, header: &[&str], columns: &[Vec<f64>]) -> Result<Artifact, CliError> {
    let mut bytes = Vec::new();
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_table(&mut bytes, &header, columns).context(name)?;
    Ok(Artifact { name: name.to_string(), bytes })
}

fn csv_artifact(name: &str, f: impl FnOnce(&mut Vec<u8>) -> fracnoether::Result<()>) -> Result<Artifact, CliError> {
    let mut bytes = Vec::new();
    f(&mut bytes).context(name)?;
    Ok(Artifact { name: name.to_string(), bytes })
}

/// Metrics against grid size; `order_<metric>` columns hold `log2` of
/// successive ratios when more than one grid is present.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    pub metrics: Vec<String>,
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl StudyTable {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["n".to_string()];
        h.extend(self.metrics.iter().cloned());
        if self.rows.len() > 1 {
            h.extend(self.metrics.iter().map(|m| format!("order_{m}")));
        }
        h
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        let mut cols = vec![self.rows.iter().map(|r| r.0 as f64).collect::<Vec<f64>>()];
        for k in 0..self.metrics.len() {
            cols.push(self.rows.iter().map(|r| r.1[k]).collect());
        }
        if self.rows.len() > 1 {
            for k in 0..self.metrics.len() {
                cols.push(
                    (0..self.rows.len())
                        .map(|i| if i == 0 { f64::NAN } else { (self.rows[i - 1].1[k] / self.rows[i].1[k]).log2() })
                        .collect(),
                );
            }
        }
        cols
    }

    pub fn artifact(&self, name: &str) -> Result<Artifact, CliError> {
        let header = self.header();
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        table(name, &refs, &self.columns())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Operator {
    CaputoLeft,
    CaputoRight,
    RlLeft,
    RlRight,
    IntegralLeft,
    IntegralRight,
}

/// Power-rule convergence test of one operator.
#[derive(Debug, Clone)]
pub struct OperatorTest {
    op: Operator,
    alpha: f64,
    exponent: f64,
    a: f64,
    b: f64,
    grids: Vec<usize>,
}

impl OperatorTest {
    fn from_params(p: &Params) -> Result<Self, CliError> {
        let op = match p.str_or("operator", "caputo-left")? {
            "caputo-left" => Operator::CaputoLeft,
            "caputo-right" => Operator::CaputoRight,
            "rl-left" => Operator::RlLeft,
            "rl-right" => Operator::RlRight,
            "integral-left" => Operator::IntegralLeft,
            "integral-right" => Operator::IntegralRight,
            other => {
                return Err(CliError::validation(
                    "operator",
                    format!("unknown operator \"{other}\"; expected caputo-left, caputo-right, rl-left, rl-right, integral-left or integral-right"),
                ))
            }
        };
        let alpha = p.f64("alpha")?;
        let alpha = if matches!(op, Operator::IntegralLeft | Operator::IntegralRight) {
            check_positive("alpha", alpha)?
        } else {
            check_alpha("alpha", alpha)?
        };
        let exponent = p.f64_or("exponent", 2.0)?;
        if exponent < 0.0 {
            return Err(CliError::validation("exponent", "must be non-negative"));
        }
        let (a, b) = interval(p)?;
        let grids = p.usize_list_or("grids", vec![64, 128, 256, 512])?;
        check_grids("grids", &grids)?;
        Ok(OperatorTest { op, alpha, exponent, a, b, grids })
    }

    /// Exact value on `(t - a)^p` (left) or `(b - t)^p` (right).
    fn exact(&self, t: f64) -> f64 {
        let p = self.exponent;
        let (order, dist) = match self.op {
            Operator::CaputoLeft | Operator::RlLeft => (-self.alpha, t - self.a),
            Operator::CaputoRight | Operator::RlRight => (-self.alpha, self.b - t),
            Operator::IntegralLeft => (self.alpha, t - self.a),
            Operator::IntegralRight => (self.alpha, self.b - t),
        };
        if p == 0.0 && matches!(self.op, Operator::CaputoLeft | Operator::CaputoRight) {
            return 0.0;
        }
        let c = fracnoether::gamma::gamma(p + 1.0) * recip_gamma(p + 1.0 + order);
        if c == 0.0 { 0.0 } else { c * dist.powf(p + order) }
    }

    fn error(&self, n: usize) -> Result<f64, CliError> {
        let g = Grid::new(self.a, self.b, n).context("grid")?;
        let left = matches!(self.op, Operator::CaputoLeft | Operator::RlLeft | Operator::IntegralLeft);
        let f = GridFunction::from_fn(g, |t| if left { (t - self.a).powf(self.exponent) } else { (self.b - t).powf(self.exponent) })
            .context("test function")?;
        let order = |x: f64| if x <= 1.0 { FractionalOrder::derivative(x) } else { FractionalOrder::integral(x) };
        let out = match self.op {
            Operator::CaputoLeft => caputo_left(&f, order(self.alpha).context("order")?),
            Operator::CaputoRight => caputo_right(&f, order(self.alpha).context("order")?),
            Operator::RlLeft => rl_derivative_left(&f, order(self.alpha).context("order")?),
            Operator::RlRight => rl_derivative_right(&f, order(self.alpha).context("order")?),
            Operator::IntegralLeft => rl_integral_left(&f, FractionalOrder::integral(self.alpha).context("order")?),
            Operator::IntegralRight => rl_integral_right(&f, FractionalOrder::integral(self.alpha).context("order")?),
        }
        .context("operator")?;
        Ok((0..g.len())
            .filter_map(|i| {
                let e = self.exact(g.node(i));
                let v = out.value(i, 0);
                (e.is_finite() && v.is_finite()).then(|| (v - e).abs())
            })
            .fold(0.0, f64::max))
    }
}

fn interval(p: &Params) -> Result<(f64, f64), CliError> {
    let a = p.f64_or("a", 0.0)?;
    let b = p.f64_or("b", 1.0)?;
    if b <= a {
        return Err(CliError::validation("b", format!("must exceed a = {a}, got {b}")));
    }
    Ok((a, b))
}

fn check_grids(key: &str, grids: &[usize]) -> Result<(), CliError> {
    if grids.is_empty() {
        return Err(CliError::validation(key, "needs at least one grid"));
    }
    for &n in grids {
        check_intervals(key, n)?;
    }
    Ok(())
}

fn lagrangian(p: &Params, dim: usize) -> Result<LagrangianSpec, CliError> {
    let spec = match p.str("lagrangian")? {
        "free" => LagrangianSpec::new(Free { dim, mass: check_positive("mass", p.f64_or("mass", 1.0)?)? }),
        "harmonic" => LagrangianSpec::new(Harmonic {
            dim,
            mass: check_positive("mass", p.f64_or("mass", 1.0)?)?,
            stiffness: p.f64_or("stiffness", 1.0)?,
        }),
        "quadratic" => LagrangianSpec::new(QuadraticForm {
            dim,
            qq: p.f64_or("qq", 0.0)?,
            vv: p.f64_or("vv", 0.0)?,
            ww: p.f64_or("ww", 0.0)?,
            qv: p.f64_or("qv", 0.0)?,
            qw: p.f64_or("qw", 0.0)?,
            vw: p.f64_or("vw", 0.0)?,
            q: p.f64_or("q", 0.0)?,
            v: p.f64_or("v", 0.0)?,
            w: p.f64_or("w", 0.0)?,
            tq: p.f64_or("tq", 0.0)?,
        }),
        "potential" => LagrangianSpec::new(PotentialPolynomial {
            dim,
            mass: check_positive("mass", p.f64_or("mass", 1.0)?)?,
            gamma: p.f64_or("gamma", 0.0)?,
            potential: Polynomial::new(p.f64_list("potential")?),
        }),
        other => {
            return Err(CliError::validation("lagrangian", format!("unknown family \"{other}\"; expected free, harmonic, quadratic or potential")))
        }
    };
    spec.context("lagrangian")
}

fn variational_problem(p: &Params) -> Result<VariationalProblem, CliError> {
    let dim = p.usize_or("dim", 1)?;
    if dim == 0 {
        return Err(CliError::validation("dim", "must be at least 1"));
    }
    let l = lagrangian(p, dim)?;
    let alpha = check_alpha("alpha", p.f64("alpha")?)?;
    let (a, b) = interval(p)?;
    let n = check_intervals("n", p.usize("n")?)?;
    let q_a = state_vector(p, "q_a", dim)?;
    let q_b = state_vector(p, "q_b", dim)?;
    let grid = Grid::new(a, b, n).context("grid")?;
    VariationalProblem::new(l, grid, FractionalOrder::derivative(alpha).context("alpha")?, q_a, q_b).context("variational problem")
}

fn solve_options(ov: &Overrides) -> SolveOptions {
    let mut o = SolveOptions::default();
    if let Some(t) = ov.tol {
        o.tol = t;
    }
    o
}

#[derive(Debug, Clone)]
pub struct ExtremalSetup {
    problem: VariationalProblem,
    options: SolveOptions,
}

impl ExtremalSetup {
    fn solve(&self, n: usize) -> Result<(VariationalProblem, ExtremalSolution), CliError> {
        let p = self.problem.with_intervals(n).context("refine")?;
        let sol = solve_extremal_with(&p, None, &self.options).context("solve_extremal")?;
        Ok((p, sol))
    }
}

#[derive(Debug, Clone)]
pub struct NoetherSetup {
    extremal: ExtremalSetup,
    symmetry: SymmetryGroup,
    time_transform: bool,
    truncation: usize,
}

#[derive(Debug, Clone)]
pub struct FrictionSetup {
    problem: FrictionProblem,
    q0: f64,
    v0: f64,
    t_end: f64,
    steps: usize,
    window_mid: f64,
    window_width: f64,
    windows: usize,
    window_intervals: usize,
}

#[derive(Debug, Clone)]
pub struct ControlSetup {
    problem: ControlProblem,
    options: ControlOptions,
}

#[derive(Debug, Clone)]
pub enum Prepared {
    Operator(OperatorTest),
    Extremal(ExtremalSetup),
    Noether(NoetherSetup),
    Friction(FrictionSetup),
    Control(ControlSetup),
}

/// Validates every parameter of the scenario before anything runs.
pub fn prepare(s: &Scenario, ov: &Overrides) -> Result<Prepared, CliError> {
    if let Some(t) = ov.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::validation("tol", format!("must be positive, got {t}")));
        }
    }
    if let Some(r) = ov.truncation {
        if r > 6 {
            return Err(CliError::validation("truncation", format!("at most 6, got {r}")));
        }
    }
    let p = Params::new(&s.parameters);
    let prepared = match s.kind {
        Kind::OperatorTest => Prepared::Operator(OperatorTest::from_params(&p)?),
        Kind::Extremal => Prepared::Extremal(ExtremalSetup { problem: variational_problem(&p)?, options: solve_options(ov) }),
        Kind::Noether => {
            let problem = variational_problem(&p)?;
            let dim = problem.dim();
            let (symmetry, time_transform) = match p.str("symmetry")? {
                "time-translation" => (SymmetryGroup::time_translation(dim), true),
                "space-translation" => (SymmetryGroup::space_translation(state_vector(&p, "direction", dim).or_else(|e| {
                    if p.has("direction") { Err(e) } else { Ok(vec![1.0; dim]) }
                })?), false),
                "rotation" => {
                    if dim != 2 {
                        return Err(CliError::validation("symmetry", "rotation needs dim = 2"));
                    }
                    (SymmetryGroup::rotation(p.f64_or("omega", 1.0)?), false)
                }
                other => {
                    return Err(CliError::validation(
                        "symmetry",
                        format!("unknown symmetry \"{other}\"; expected time-translation, space-translation or rotation"),
                    ))
                }
            };
            let symmetry = symmetry.context("symmetry")?;
            let truncation = ov.truncation.unwrap_or(p.usize_or("truncation", DEFAULT_TRUNCATION)?);
            if truncation > 6 {
                return Err(CliError::validation("truncation", format!("at most 6, got {truncation}")));
            }
            Prepared::Noether(NoetherSetup { extremal: ExtremalSetup { problem, options: solve_options(ov) }, symmetry, time_transform, truncation })
        }
        Kind::Friction => Prepared::Friction(friction_setup(&p)?),
        Kind::Control => Prepared::Control(control_setup(&p, ov)?),
    };
    p.finish()?;
    Ok(prepared)
}

fn friction_setup(p: &Params) -> Result<FrictionSetup, CliError> {
    let mass = check_positive("mass", p.f64_or("mass", 1.0)?)?;
    let gamma = p.f64_or("gamma", 1.0)?;
    if gamma < 0.0 {
        return Err(CliError::validation("gamma", "must be non-negative"));
    }
    let potential = Polynomial::new(p.f64_list_or("potential", vec![])?);
    let t_end = check_positive("t_end", p.f64_or("t_end", 1.0)?)?;
    let steps = p.usize_or("steps", 1024)?;
    if !(16..=1 << 22).contains(&steps) {
        return Err(CliError::validation("steps", format!("must lie in [16, 4194304], got {steps}")));
    }
    let window_mid = p.f64_or("window_mid", 0.5 * t_end)?;
    let window_width = check_positive("window_width", p.f64_or("window_width", 0.25 * t_end)?)?;
    if window_mid - 0.5 * window_width < 0.0 || window_mid + 0.5 * window_width > t_end {
        return Err(CliError::validation("window_width", format!("window around {window_mid} leaves [0, {t_end}]")));
    }
    let windows = p.usize_or("windows", 5)?;
    if windows == 0 {
        return Err(CliError::validation("windows", "must be at least 1"));
    }
    let window_intervals = check_intervals("window_intervals", p.usize_or("window_intervals", 256)?)?;
    if window_intervals % 2 != 0 {
        return Err(CliError::validation("window_intervals", "must be even so the window midpoint is a node"));
    }
    let grid = Grid::new(0.0, t_end, steps).context("grid")?;
    let problem = FrictionProblem::new(mass, gamma, potential, grid).context("friction problem")?;
    Ok(FrictionSetup {
        problem,
        q0: p.f64_or("q0", 0.0)?,
        v0: p.f64_or("v0", 1.0)?,
        t_end,
        steps,
        window_mid,
        window_width,
        windows,
        window_intervals,
    })
}

fn control_setup(p: &Params, ov: &Overrides) -> Result<ControlSetup, CliError> {
    let family = p.str("family")?;
    let problem = if family == "reduction" {
        ControlProblem::reduction_of(&variational_problem(p)?).context("reduction")?
    } else {
        let system = match family {
            "linear-quadratic" => PolynomialControl::linear_quadratic(
                p.f64_or("state_weight", 1.0)?,
                p.f64_or("control_weight", 1.0)?,
                p.f64_or("state_gain", 0.0)?,
                p.f64_or("control_gain", 1.0)?,
            ),
            "polynomial" => {
                let dim = p.usize_or("dim", 1)?;
                if dim == 0 {
                    return Err(CliError::validation("dim", "must be at least 1"));
                }
                PolynomialControl {
                    dim,
                    fractional: p.bool_or("fractional", false)?,
                    cost_q: Polynomial::new(p.f64_list_or("cost_q", vec![])?),
                    cost_u: Polynomial::new(p.f64_list_or("cost_u", vec![])?),
                    cost_mu: Polynomial::new(p.f64_list_or("cost_mu", vec![])?),
                    velocity_q: Polynomial::new(p.f64_list_or("velocity_q", vec![])?),
                    velocity_u: p.f64_or("velocity_u", 1.0)?,
                    fractional_q: Polynomial::new(p.f64_list_or("fractional_q", vec![])?),
                    fractional_mu: p.f64_or("fractional_mu", 1.0)?,
                }
            }
            other => {
                return Err(CliError::validation("family", format!("unknown family \"{other}\"; expected linear-quadratic, reduction or polynomial")))
            }
        };
        let dim = system.dim;
        let spec = ControlSpec::new(system).context("control system")?;
        let alpha = check_alpha("alpha", p.f64("alpha")?)?;
        let (a, b) = interval(p)?;
        let n = check_intervals("n", p.usize("n")?)?;
        let grid = Grid::new(a, b, n).context("grid")?;
        let cp = ControlProblem::new(spec, FractionalOrder::derivative(alpha).context("alpha")?, grid, state_vector(p, "q_a", dim)?)
            .context("control problem")?;
        if p.has("q_b") {
            cp.with_terminal(state_vector(p, "q_b", dim)?).context("terminal condition")?
        } else {
            cp
        }
    };
    let mut options = ControlOptions {
        initial_weight: check_positive("penalty_weight", p.f64_or("penalty_weight", 100.0)?)?,
        growth: p.f64_or("penalty_growth", 10.0)?,
        rounds: p.usize_or("penalty_rounds", 3)?,
        ..Default::default()
    };
    if options.growth <= 1.0 {
        return Err(CliError::validation("penalty_growth", "must exceed 1"));
    }
    if options.rounds == 0 {
        return Err(CliError::validation("penalty_rounds", "must be at least 1"));
    }
    if let Some(t) = ov.tol {
        options.tol = t;
    }
    if problem.grid().intervals() > fracnoether::optctrl::MAX_INTERVALS {
        return Err(CliError::validation("n", format!("control problems allow at most {} intervals", fracnoether::optctrl::MAX_INTERVALS)));
    }
    Ok(ControlSetup { problem, options })
}

/// Cubic Hermite interpolant of a `[q, q̇]` trajectory.
pub fn hermite(sim: &GridFunction) -> impl Fn(f64) -> f64 + '_ {
    move |t| {
        let g = sim.grid();
        let h = g.step();
        let x = ((t - g.a()) / h).clamp(0.0, g.intervals() as f64);
        let i = (x.floor() as usize).min(g.intervals() - 1);
        let s = x - i as f64;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * sim.value(i, 0)
            + (s3 - 2.0 * s2 + s) * h * sim.value(i, 1)
            + (-2.0 * s3 + 3.0 * s2) * sim.value(i + 1, 0)
            + (s3 - s2) * h * sim.value(i + 1, 1)
    }
}

impl Prepared {
    pub fn kind(&self) -> Kind {
        match self {
            Prepared::Operator(_) => Kind::OperatorTest,
            Prepared::Extremal(_) => Kind::Extremal,
            Prepared::Noether(_) => Kind::Noether,
            Prepared::Friction(_) => Kind::Friction,
            Prepared::Control(_) => Kind::Control,
        }
    }

    /// Grid size used by `run` (the operator test uses its grid list).
    fn base_intervals(&self) -> usize {
        match self {
            Prepared::Operator(o) => *o.grids.last().unwrap(),
            Prepared::Extremal(e) => e.problem.grid().intervals(),
            Prepared::Noether(n) => n.extremal.problem.grid().intervals(),
            Prepared::Friction(f) => f.steps,
            Prepared::Control(c) => c.problem.grid().intervals(),
        }
    }

    pub fn run(&self) -> Result<Vec<Artifact>, CliError> {
        let n = self.base_intervals();
        match self {
            Prepared::Operator(o) => Ok(vec![self.study(&o.grids)?.artifact("convergence.csv")?]),
            Prepared::Extremal(e) => {
                let (_, sol) = e.solve(n)?;
                Ok(vec![
                    csv_artifact("extremal.csv", |w| sol.write_csv(w))?,
                    table(
                        "summary.csv",
                        &["action", "el_residual_norm", "iterations", "gradient_norm"],
                        &[vec![sol.action], vec![sol.el_residual_norm], vec![sol.iterations as f64], vec![sol.gradient_norm]],
                    )?,
                ])
            }
            Prepared::Noether(ns) => {
                let (p, sol) = ns.extremal.solve(n)?;
                let q = &sol.trajectory;
                let c = noether_quantity(&p, q, &ns.symmetry, ns.truncation).context("noether_quantity")?;
                let drift = drift_report(&c).context("drift_report")?;
                let defect = invariance_defect(&p, q, &ns.symmetry, ns.time_transform).context("invariance_defect")?;
                let necessary = invariance_necessary_residual(&p, q, &ns.symmetry).context("invariance_necessary_residual")?.max_norm();
                Ok(vec![
                    csv_artifact("extremal.csv", |w| sol.write_csv(w))?,
                    table("noether.csv", &["t", "C"], &[p.grid().nodes(), c.component(0)])?,
                    csv_artifact("generators.csv", |w| ns.symmetry.write_generators_csv(q, w))?,
                    table(
                        "summary.csv",
                        &["action", "el_residual_norm", "drift", "invariance_defect", "necessary_residual_norm", "truncation"],
                        &[vec![sol.action], vec![sol.el_residual_norm], vec![drift], vec![defect], vec![necessary], vec![ns.truncation as f64]],
                    )?,
                ])
            }
            Prepared::Friction(f) => f.run(),
            Prepared::Control(c) => {
                let sol = solve_control_with(&c.problem, &c.options).context("solve_control")?;
                let st = &sol.state;
                let dh = drift_report(&hamiltonian_along(&c.problem, st).context("hamiltonian")?).context("drift of H")?;
                let di = if c.problem.system().is_autonomous() {
                    drift_report(&autonomous_control_quantity(&c.problem, st).context("invariant")?).context("drift of invariant")?
                } else {
                    f64::NAN
                };
                let r = &sol.rounds;
                let col = |f: &dyn Fn(&fracnoether::optctrl::PenaltyRound) -> f64| r.iter().map(f).collect::<Vec<f64>>();
                Ok(vec![
                    csv_artifact("control.csv", |w| write_control_csv(&c.problem, st, w))?,
                    table(
                        "rounds.csv",
                        &["weight", "velocity_defect", "fractional_defect", "terminal_defect", "iterations", "gradient_norm"],
                        &[
                            col(&|x| x.weight),
                            col(&|x| x.velocity_defect),
                            col(&|x| x.fractional_defect),
                            col(&|x| x.terminal_defect),
                            col(&|x| x.iterations as f64),
                            col(&|x| x.gradient_norm),
                        ],
                    )?,
                    table(
                        "summary.csv",
                        &["cost", "final_defect", "drift_hamiltonian", "drift_invariant"],
                        &[vec![sol.cost], vec![sol.final_defect()], vec![dh], vec![di]],
                    )?,
                ])
            }
        }
    }

    /// Re-runs the scenario at each grid size.
    pub fn study(&self, grids: &[usize]) -> Result<StudyTable, CliError> {
        check_grids("grids", grids)?;
        let (metrics, row): (Vec<&str>, Box<dyn Fn(usize) -> Result<Vec<f64>, CliError>>) = match self {
            Prepared::Operator(o) => (vec!["error"], Box::new(|n| Ok(vec![o.error(n)?]))),
            Prepared::Extremal(e) => (
                vec!["action", "el_residual_norm"],
                Box::new(|n| {
                    let (_, s) = e.solve(n)?;
                    Ok(vec![s.action, s.el_residual_norm])
                }),
            ),
            Prepared::Noether(ns) => (
                vec!["drift", "el_residual_norm"],
                Box::new(|n| {
                    let (p, s) = ns.extremal.solve(n)?;
                    let c = noether_quantity(&p, &s.trajectory, &ns.symmetry, ns.truncation).context("noether_quantity")?;
                    Ok(vec![drift_report(&c).context("drift_report")?, s.el_residual_norm])
                }),
            ),
            Prepared::Friction(_) => return Err(CliError::validation("kind", "friction scenarios have no refinement study")),
            Prepared::Control(c) => (
                vec!["drift_hamiltonian", "drift_invariant", "final_defect"],
                Box::new(|n| {
                    if n > fracnoether::optctrl::MAX_INTERVALS {
                        return Err(CliError::validation("grids", format!("control problems allow at most {} intervals", fracnoether::optctrl::MAX_INTERVALS)));
                    }
                    let cp = c.problem.with_intervals(n).context("refine")?;
                    let sol = solve_control_with(&cp, &c.options).context("solve_control")?;
                    let dh = drift_report(&hamiltonian_along(&cp, &sol.state).context("hamiltonian")?).context("drift of H")?;
                    let di = if cp.system().is_autonomous() {
                        drift_report(&autonomous_control_quantity(&cp, &sol.state).context("invariant")?).context("drift of invariant")?
                    } else {
                        f64::NAN
                    };
                    Ok(vec![dh, di, sol.final_defect()])
                }),
            ),
        };
        let rows = grids.iter().map(|&n| Ok((n, row(n)?))).collect::<Result<Vec<_>, CliError>>()?;
        Ok(StudyTable { metrics: metrics.into_iter().map(String::from).collect(), rows })
    }
}

impl FrictionSetup {
    /// Trajectory, diagnostics along it, and the window-shrink table.
    fn run(&self) -> Result<Vec<Artifact>, CliError> {
        let sim = simulate_damped_eom(&self.problem, self.q0, self.v0, self.t_end, self.steps).context("simulate_damped_eom")?;
        let q = GridFunction::scalar(*sim.grid(), sim.component(0)).context("trajectory")?;
        let diag = friction_diagnostics(&self.problem, &q).context("friction_diagnostics")?;
        let windows = nested_windows(self.window_mid, self.window_width, self.windows, self.window_intervals).context("windows")?;
        let interp = hermite(&sim);
        let study = window_shrink_study(&self.problem, &interp, &windows).context("window_shrink_study")?;
        Ok(vec![
            table("trajectory.csv", &["t", "q", "v"], &[sim.grid().nodes(), sim.component(0), sim.component(1)])?,
            csv_artifact("diagnostics.csv", |w| diag.write_csv(w))?,
            csv_artifact("window_shrink.csv", |w| study.write_csv(w))?,
        ])
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn prep(text: &str) -> Result<Prepared, CliError> {
        prepare(&Scenario::parse(text).unwrap(), &Overrides::default())
    }

    #[test]
    fn operator_exact_values() {
        let Prepared::Operator(o) = prep("kind = \"operator-test\"\n[parameters]\nalpha = 0.5").unwrap() else { panic!() };
        // Γ(3)/Γ(2.5) t^{1.5}
        assert!((o.exact(1.0) - 2.0 / (0.75 * PI.sqrt())).abs() < 1e-13);
    }

    #[test]
    fn missing_alpha_is_named() {
        let e = prep("kind = \"extremal\"\n[parameters]\nlagrangian = \"free\"\nn = 8\nq_a = 0\nq_b = 1").unwrap_err();
        assert!(matches!(e, CliError::Validation { ref key, .. } if key == "alpha"), "{e}");
    }

    #[test]
    fn ranges_checked_before_dispatch() {
        for (text, key) in [
            ("kind = \"operator-test\"\n[parameters]\nalpha = 1.5", "alpha"),
            ("kind = \"operator-test\"\n[parameters]\nalpha = 0.5\ngrids = [1]", "grids"),
            ("kind = \"friction\"\n[parameters]\nwindow_width = 3.0", "window_width"),
            ("kind = \"friction\"\n[parameters]\nwindow_intervals = 31", "window_intervals"),
            ("kind = \"control\"\n[parameters]\nfamily = \"bang\"", "family"),
            ("kind = \"noether\"\n[parameters]\nlagrangian = \"free\"\nalpha = 1\nn = 8\nq_a = 0\nq_b = 1\nsymmetry = \"rotation\"", "symmetry"),
            ("kind = \"extremal\"\n[parameters]\nlagrangian = \"free\"\nalpha = 1\nn = 8\nq_a = 0\nq_b = 1\nb = -1", "b"),
        ] {
            match prep(text) {
                Err(CliError::Validation { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let g = Grid::new(0.0, 1.0, 4).unwrap();
        let sim = GridFunction::from_fn_vec(g, 2, |t| vec![t * t * t - t, 3.0 * t * t - 1.0]).unwrap();
        let f = hermite(&sim);
        for t in [0.0, 0.1, 0.37, 0.5, 0.99, 1.0] {
            assert!((f(t) - (t * t * t - t)).abs() < 1e-14);
        }
    }

    #[test]
    fn single_grid_study_has_no_order_column() {
        let p = prep("kind = \"operator-test\"\n[parameters]\nalpha = 0.5").unwrap();
        let t = p.study(&[64]).unwrap();
        assert_eq!(t.header(), vec!["n", "error"]);
        let t = p.study(&[64, 128]).unwrap();
        assert_eq!(t.header(), vec!["n", "error", "order_error"]);
    }
}
