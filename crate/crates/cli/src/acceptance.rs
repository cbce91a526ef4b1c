//! The acceptance suite: one check per criterion, each with a runtime
//! budget, plus a determinism check that repeats the others.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;
use std::time::{Duration, Instant};

use fracnoether::calculus::central_diff;
use fracnoether::fracops::{caputo_left, caputo_right, ibp_residual, rl_derivative_left, rl_derivative_right};
use fracnoether::friction::{friction_diagnostics, nested_windows, simulate_damped_eom, window_shrink_study, FrictionProblem};
use fracnoether::gamma::gamma;
use fracnoether::noether::{drift_report, noether_quantity, transfer_series, SymmetryGroup, DEFAULT_TRUNCATION};
use fracnoether::optctrl::{autonomous_control_quantity, hamiltonian_along, pontryagin_residuals, solve_control, ControlProblem, ControlSpec, PolynomialControl, PontryaginState};
use fracnoether::variational::{solve_extremal, Harmonic, LagrangianSpec, Polynomial, QuadraticForm, VariationalProblem};
use fracnoether::{FractionalOrder, Grid, GridFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::manifest::{entry, FileEntry};
use crate::scenario::{hermite, Artifact};

pub const CRITERIA: u32 = 11;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget: Option<Duration>,
}

impl Outcome {
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let budget = self.budget.map_or(String::new(), |b| format!(" of {}s", b.as_secs()));
        format!("criterion {:>2}  {verdict}  {}: {} [{:.2}s{budget}]", self.id, self.title, self.detail, self.seconds)
    }
}

type Check = fracnoether::Result<(bool, String, Vec<Artifact>)>;

struct Criterion {
    title: &'static str,
    budget: u64,
    check: fn() -> Check,
}

const LIST: [Criterion; 10] = [
    Criterion { title: "operator accuracy", budget: 1, check: operator_accuracy },
    Criterion { title: "classical limit", budget: 1, check: classical_limit },
    Criterion { title: "integration by parts", budget: 5, check: integration_by_parts },
    Criterion { title: "harmonic extremal", budget: 30, check: harmonic_extremal },
    Criterion { title: "classical energy", budget: 5, check: classical_energy },
    Criterion { title: "fractional Noether quantity", budget: 120, check: fractional_noether },
    Criterion { title: "transfer identity", budget: 10, check: transfer_identity },
    Criterion { title: "friction demo", budget: 30, check: friction_demo },
    Criterion { title: "Pontryagin reduction", budget: 10, check: pontryagin_reduction },
    Criterion { title: "control Noether quantity", budget: 120, check: control_noether },
];

fn csv(name: &str, header: &[&str], columns: &[Vec<f64>]) -> fracnoether::Result<Artifact> {
    let mut bytes = Vec::new();
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    fracnoether::grid::write_table(&mut bytes, &header, columns)?;
    Ok(Artifact { name: name.to_string(), bytes })
}

fn der(a: f64) -> FractionalOrder {
    FractionalOrder::derivative(a).expect("order in (0, 1]")
}

/// Least-squares slope of `-log err` against `log n`.
fn fitted_order(ns: &[usize], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| -e.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn operator_accuracy() -> Check {
    let ns = [64usize, 128, 256, 512];
    let c = 2.0 / gamma(2.5);
    let mut errs = Vec::new();
    for &n in &ns {
        let g = Grid::new(0.0, 1.0, n)?;
        let d = caputo_left(&GridFunction::from_fn(g, |t| t * t)?, der(0.5))?;
        errs.push((0..=n).map(|i| (d.value(i, 0) - c * g.node(i).powf(1.5)).abs()).fold(0.0, f64::max));
    }
    let order = fitted_order(&ns, &errs);
    let last = errs[ns.len() - 1];
    let passed = last < 5e-3 && (1.3..=2.0).contains(&order);
    let art = csv("c01_caputo_convergence.csv", &["n", "error"], &[ns.iter().map(|&n| n as f64).collect(), errs])?;
    Ok((passed, format!("error at n=512 {last:.3e}, order {order:.3}"), vec![art]))
}

fn classical_limit() -> Check {
    let polys = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.5, -2.0, 3.0, 0.0], [-1.0, 0.3, 2.0, -1.7], [2.0, 0.0, -4.0, 5.0]];
    let mut worst = 0.0f64;
    let mut flagged = 0usize;
    let g = Grid::new(-0.5, 1.5, 128)?;
    let mut cols = vec![g.nodes()];
    for c in polys {
        let f = GridFunction::from_fn(g, |t| c[0] + t * (c[1] + t * (c[2] + t * c[3])))?;
        let d = central_diff(f.values(), g.step());
        let ops = [
            (caputo_left(&f, der(1.0))?, 1.0),
            (rl_derivative_left(&f, der(1.0))?, 1.0),
            (caputo_right(&f, der(1.0))?, -1.0),
            (rl_derivative_right(&f, der(1.0))?, -1.0),
        ];
        for (out, sign) in &ops {
            for i in 0..=128 {
                let v = out.value(i, 0);
                if v.is_finite() {
                    worst = worst.max((v - sign * d[i]).abs());
                } else {
                    flagged += 1;
                }
            }
        }
        cols.push(ops[0].0.component(0));
    }
    let art = csv("c02_classical_limit.csv", &["t", "p0", "p1", "p2", "p3", "p4"], &cols)?;
    Ok((worst < 1e-10 && flagged == 0, format!("max deviation {worst:.3e}, flagged nodes {flagged}"), vec![art]))
}

fn integration_by_parts() -> Check {
    let ns = [64usize, 128, 256, 512, 1024];
    let mut res = Vec::new();
    for &n in &ns {
        let g = Grid::new(0.0, 1.0, n)?;
        res.push(ibp_residual(&GridFunction::from_fn(g, |t| t * (1.0 - t))?, &GridFunction::from_fn(g, |t| t + 1.0)?, der(0.5))?);
    }
    let ratios: Vec<f64> = res.windows(2).map(|w| w[0] / w[1]).collect();
    let worst = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let art = csv("c03_ibp.csv", &["n", "residual"], &[ns.iter().map(|&n| n as f64).collect(), res])?;
    Ok((worst >= 1.8, format!("smallest reduction per doubling {worst:.3}"), vec![art]))
}

fn harmonic_problem() -> fracnoether::Result<VariationalProblem> {
    VariationalProblem::new(LagrangianSpec::new(Harmonic { dim: 1, mass: 1.0, stiffness: 1.0 })?, Grid::new(0.0, FRAC_PI_2, 512)?, der(1.0), vec![1.0], vec![0.0])
}

fn harmonic_extremal() -> Check {
    let p = harmonic_problem()?;
    let sol = solve_extremal(&p, None)?;
    let err = (0..=512).map(|i| (sol.trajectory.value(i, 0) - p.grid().node(i).cos()).abs()).fold(0.0, f64::max);
    let mut bytes = Vec::new();
    sol.write_csv(&mut bytes)?;
    let passed = err < 1e-4 && sol.el_residual_norm < 1e-3;
    Ok((passed, format!("max error vs cos {err:.3e}, residual {:.3e}", sol.el_residual_norm), vec![Artifact { name: "c04_harmonic.csv".into(), bytes }]))
}

fn classical_energy() -> Check {
    let p = harmonic_problem()?;
    let sol = solve_extremal(&p, None)?;
    let c = noether_quantity(&p, &sol.trajectory, &SymmetryGroup::time_translation(1)?, DEFAULT_TRUNCATION)?;
    let drift = drift_report(&c)?;
    let art = csv("c05_energy.csv", &["t", "C"], &[p.grid().nodes(), c.component(0)])?;
    Ok((drift < 1e-4, format!("drift {drift:.3e}"), vec![art]))
}

fn fractional_noether() -> Check {
    let ns = [128usize, 256, 512];
    let mut drifts = Vec::new();
    let s = SymmetryGroup::time_translation(1)?;
    for &n in &ns {
        let p = VariationalProblem::new(
            LagrangianSpec::new(QuadraticForm { dim: 1, vv: 1.0, ww: 1.0, ..Default::default() })?,
            Grid::new(0.0, 1.0, n)?,
            der(0.5),
            vec![0.0],
            vec![1.0],
        )?;
        let q = solve_extremal(&p, None)?.trajectory;
        drifts.push(drift_report(&noether_quantity(&p, &q, &s, DEFAULT_TRUNCATION)?)?);
    }
    let ratios: Vec<f64> = drifts.windows(2).map(|w| w[0] / w[1]).collect();
    let passed = ratios.iter().all(|&r| r >= 1.5);
    let art = csv("c06_fractional_drift.csv", &["n", "drift"], &[ns.iter().map(|&n| n as f64).collect(), drifts.clone()])?;
    Ok((passed, format!("drifts {:.3e} {:.3e} {:.3e}, ratios {:.3} {:.3}", drifts[0], drifts[1], drifts[2], ratios[0], ratios[1]), vec![art]))
}

fn transfer_identity() -> Check {
    let n = 512;
    let g = Grid::new(0.0, 1.0, n)?;
    let f = GridFunction::from_fn(g, |t| 1.0 + 2.0 * t - t * t * t)?;
    let k = GridFunction::from_fn(g, |t| (1.0 - t) * (1.0 - t) * (1.0 + t))?;
    let a = der(0.5);
    let s = transfer_series(&f, &k, a, 3)?;
    let d = central_diff(&s.sum(), g.step());
    let cf = caputo_left(&f, a)?;
    let rk = rl_derivative_right(&k, a)?;
    let mut gap = 0.0f64;
    let mut target = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let v = k.value(i, 0) * cf.value(i, 0) - f.value(i, 0) * rk.value(i, 0);
        if v.is_finite() {
            gap = gap.max((d[i] - v).abs());
        }
        target.push(v);
    }
    let art = csv("c07_transfer.csv", &["t", "series_derivative", "target"], &[g.nodes(), d, target])?;
    Ok((gap < s.tail_estimate + 0.1, format!("gap {gap:.3e}, tail estimate {:.3e}", s.tail_estimate), vec![art]))
}

fn friction_demo() -> Check {
    let free = |gamma: f64| FrictionProblem::new(1.0, gamma, Polynomial::new(vec![]), Grid::new(0.0, 1.0, 1024).unwrap());
    let damped = free(1.0)?;
    let sim = simulate_damped_eom(&damped, 0.0, 1.0, 1.0, 1024)?;
    let end_err = (sim.value(1024, 0) - (1.0 - (-1.0f64).exp())).abs();

    let windows = nested_windows(0.5, 0.2, 5, 256)?;
    let study = window_shrink_study(&damped, &hermite(&sim), &windows)?;
    let halvings: Vec<f64> = study.rows.iter().filter_map(|r| r.halving_ratio).collect();
    let halving_ok = halvings.iter().all(|h| (h - 0.5).abs() <= 0.05);

    let h_drift = |fp: &FrictionProblem| -> fracnoether::Result<f64> {
        let s = simulate_damped_eom(fp, 0.0, 1.0, 1.0, 1024)?;
        let q = GridFunction::scalar(*s.grid(), s.component(0))?;
        drift_report(&friction_diagnostics(fp, &q)?.hamiltonian)
    };
    let (d1, d0) = (h_drift(&damped)?, h_drift(&free(0.0)?)?);

    let mut bytes = Vec::new();
    study.write_csv(&mut bytes)?;
    let traj = csv("c08_trajectory.csv", &["t", "q", "v"], &[sim.grid().nodes(), sim.component(0), sim.component(1)])?;
    let passed = end_err < 1e-8 && halving_ok && d1 > 10.0 * d0;
    let worst = halvings.iter().map(|h| (h - 0.5).abs()).fold(0.0, f64::max);
    Ok((
        passed,
        format!("q(1) error {end_err:.3e}, worst halving deviation {worst:.3e}, H drift {d1:.3e} vs {d0:.3e}"),
        vec![traj, Artifact { name: "c08_window_shrink.csv".into(), bytes }],
    ))
}

fn pontryagin_reduction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    let mut cols: Vec<Vec<f64>> = vec![];
    for _ in 0..5 {
        let alpha = rng.gen_range(0.2..1.0);
        let l = QuadraticForm {
            dim: 1,
            qq: rng.gen_range(-1.0..1.0),
            vv: rng.gen_range(0.5..2.0),
            ww: rng.gen_range(0.5..2.0),
            qv: rng.gen_range(-0.5..0.5),
            qw: rng.gen_range(-0.5..0.5),
            vw: rng.gen_range(-0.5..0.5),
            q: rng.gen_range(-1.0..1.0),
            ..Default::default()
        };
        let vp = VariationalProblem::new(LagrangianSpec::new(l)?, Grid::new(0.0, 1.0, 128)?, der(alpha), vec![0.0], vec![1.0])?;
        let (c1, c2) = (rng.gen_range(-1.0..1.0), rng.gen_range(1.0..4.0));
        let q = GridFunction::from_fn(*vp.grid(), |t| t + c1 * t * (1.0 - t) + (c2 * t).sin() * t * (1.0 - t))?;
        let cp = ControlProblem::reduction_of(&vp)?;
        let res = pontryagin_residuals(&cp, &PontryaginState::from_variational(&vp, &q)?)?;
        let el = vp.el_residual(&q)?;
        let scale = el.max_norm().max(1.0);
        let [r1, r2, _, r4, r5] = res.norms();
        let mismatch = (0..=128).map(|i| (res.costate.value(i, 0) - el.value(i, 0)).abs()).fold(0.0, f64::max);
        worst = worst.max(mismatch / scale).max(r1.max(r2).max(r4).max(r5) / scale);
        cols.push(res.costate.component(0));
    }
    let mut header = vec!["t"];
    header.extend(["r0", "r1", "r2", "r3", "r4"]);
    let mut columns = vec![Grid::new(0.0, 1.0, 128)?.nodes()];
    columns.extend(cols);
    let art = csv("c09_reduction.csv", &header, &columns)?;
    Ok((worst < 1e-10, format!("largest relative mismatch {worst:.3e}"), vec![art]))
}

/// `L = (q² + u² + μ²)/2`, `q̇ = -q + u`, `C D^{1/2} q = μ`, `q(0) = 1`.
pub fn control_instance(n: usize) -> fracnoether::Result<ControlProblem> {
    let sys = PolynomialControl {
        dim: 1,
        fractional: true,
        cost_q: Polynomial::new(vec![0.0, 0.0, 0.5]),
        cost_u: Polynomial::new(vec![0.0, 0.0, 0.5]),
        cost_mu: Polynomial::new(vec![0.0, 0.0, 0.5]),
        velocity_q: Polynomial::new(vec![0.0, -1.0]),
        velocity_u: 1.0,
        fractional_q: Polynomial::default(),
        fractional_mu: 1.0,
    };
    ControlProblem::new(ControlSpec::new(sys)?, der(0.5), Grid::new(0.0, 1.0, n)?, vec![1.0])
}

fn control_noether() -> Check {
    let ns = [64usize, 128, 256];
    let (mut dh, mut di) = (Vec::new(), Vec::new());
    for &n in &ns {
        let cp = control_instance(n)?;
        let sol = solve_control(&cp)?;
        dh.push(drift_report(&hamiltonian_along(&cp, &sol.state)?)?);
        di.push(drift_report(&autonomous_control_quantity(&cp, &sol.state)?)?);
    }
    let decreasing = di.windows(2).all(|w| w[1] < w[0]);
    let below = di.iter().zip(&dh).all(|(i, h)| i <= h);
    let art = csv("c10_control_drift.csv", &["n", "drift_hamiltonian", "drift_invariant"], &[ns.iter().map(|&n| n as f64).collect(), dh.clone(), di.clone()])?;
    Ok((
        decreasing && below,
        format!(
            "invariant drift {:.3e} {:.3e} {:.3e} ({}), H drift {:.3e} {:.3e} {:.3e}",
            di[0],
            di[1],
            di[2],
            if decreasing { "decreasing" } else { "not decreasing" },
            dh[0],
            dh[1],
            dh[2]
        ),
        vec![art],
    ))
}

fn timed(id: u32, title: &'static str, budget: Option<Duration>, f: impl FnOnce() -> Check) -> (Outcome, Vec<Artifact>) {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (passed, detail, artifacts) = match result {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}"), vec![]),
    };
    let in_time = budget.is_none_or(|b| elapsed <= b);
    let detail = if in_time { detail } else { format!("{detail}; over the time budget") };
    (Outcome { id, title, passed: passed && in_time, detail, seconds: elapsed.as_secs_f64(), budget }, artifacts)
}

fn run_one(id: u32) -> (Outcome, Vec<Artifact>) {
    let c = &LIST[(id - 1) as usize];
    timed(id, c.title, Some(Duration::from_secs(c.budget)), c.check)
}

fn artifacts_of_all() -> Vec<Artifact> {
    (1..CRITERIA).flat_map(|id| run_one(id).1).collect()
}

fn determinism(first: Vec<Artifact>) -> (Outcome, Vec<Artifact>) {
    timed(11, "determinism", None, move || {
        let second = artifacts_of_all();
        let digests = |a: &[Artifact]| a.iter().map(entry).collect::<Vec<FileEntry>>();
        let (d1, d2) = (digests(&first), digests(&second));
        let differing: Vec<&str> = d1.iter().zip(&d2).filter(|(x, y)| x != y).map(|(x, _)| x.name.as_str()).collect();
        let passed = !d1.is_empty() && d1.len() == d2.len() && differing.is_empty();
        Ok((passed, format!("{} CSVs compared, {} differ {differing:?}", d1.len(), differing.len()), vec![]))
    })
}

/// Runs a single criterion. Criterion 11 repeats criteria 1-10 twice.
pub fn run_criterion(id: u32) -> Outcome {
    assert!((1..=CRITERIA).contains(&id), "criteria are numbered 1 to {CRITERIA}");
    if id == CRITERIA {
        determinism(artifacts_of_all()).0
    } else {
        run_one(id).0
    }
}

/// Runs every criterion, printing each line as it completes, and writes the
/// CSVs of the first pass into `dir` when given.
pub fn run_suite(dir: Option<&Path>, mut report: impl FnMut(&Outcome)) -> Result<Vec<Outcome>, crate::CliError> {
    let mut outcomes = Vec::new();
    let mut artifacts = Vec::new();
    for id in 1..CRITERIA {
        let (o, a) = run_one(id);
        report(&o);
        outcomes.push(o);
        artifacts.extend(a);
    }
    if let Some(d) = dir {
        crate::manifest::write_artifacts(d, &artifacts)?;
        let m = crate::RunManifest {
            scenario: serde_json::json!({ "kind": "accept" }),
            version: crate::VERSION.to_string(),
            wall_clock_seconds: outcomes.iter().map(|o| o.seconds).sum(),
            files: artifacts.iter().map(entry).collect(),
        };
        crate::manifest::write_manifest(d, &m)?;
    }
    let (o, _) = determinism(artifacts);
    report(&o);
    outcomes.push(o);
    Ok(outcomes)
}
