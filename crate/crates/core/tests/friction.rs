mod common;

use std::f64::consts::PI;

use fracnoether::calculus::central_diff;
use fracnoether::fracops::{caputo_left, rl_derivative_right};
use fracnoether::friction::*;
use fracnoether::noether::drift_report;
use fracnoether::variational::{solve_extremal, Polynomial};
use fracnoether::{Error, FractionalOrder, Grid, GridFunction};
use proptest::prelude::*;

fn quartic() -> Polynomial {
    Polynomial::new(vec![0.0, 0.3, 0.5, 0.0, 0.1])
}

fn fp(gamma: f64, a: f64, b: f64, n: usize) -> FrictionProblem {
    FrictionProblem::new(1.3, gamma, quartic(), Grid::new(a, b, n).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partials_match_finite_differences(q in -2.0f64..2.0, v in -2.0f64..2.0, w in -2.0f64..2.0, gamma in 0.0f64..3.0) {
        let l = friction_lagrangian(&fp(gamma, 0.0, 1.0, 16));
        let p = l.partials(0.3, &[q], &[v], &[w]);
        let e = 1e-5;
        let f = |dq: f64, dv: f64, dw: f64| l.value(0.3, &[q + dq], &[v + dv], &[w + dw]);
        let fd = [
            (f(e, 0.0, 0.0) - f(-e, 0.0, 0.0)) / (2.0 * e),
            (f(0.0, e, 0.0) - f(0.0, -e, 0.0)) / (2.0 * e),
            (f(0.0, 0.0, e) - f(0.0, 0.0, -e)) / (2.0 * e),
        ];
        prop_assert!((p.dq[0] - fd[0]).abs() < 1e-8);
        prop_assert!((p.dv[0] - fd[1]).abs() < 1e-8);
        prop_assert!((p.dw[0] - fd[2]).abs() < 1e-8);
    }
}

#[test]
fn half_momentum_of_linear_motion() {
    let f = fp(0.7, 0.0, 2.0, 200);
    let q = GridFunction::from_fn(*f.window(), |t| 1.0 + 1.5 * t).unwrap();
    let d = friction_diagnostics(&f, &q).unwrap();
    for i in 0..=200 {
        let t = f.window().node(i);
        assert!((d.p_half.value(i, 0) - 0.7 * 1.5 * 2.0 * (t / PI).sqrt()).abs() < 1e-10);
        assert!((d.p.value(i, 0) - 1.3 * 1.5).abs() < 1e-12);
    }
}

fn path(t: f64) -> f64 {
    t.sin() + 0.5 * t
}

#[test]
fn friction_energy_vanishes_linearly_with_the_window() {
    let f = fp(0.9, 0.0, 1.0, 16);
    let windows = nested_windows(1.0, 0.4, 6, 256).unwrap();
    let table = window_shrink_study(&f, &path, &windows).unwrap();
    // |q̇| ≤ 1.5 for this path
    for r in &table.rows {
        assert!(r.p_half.abs() <= 0.9 * 1.5 * 2.0 * r.width.sqrt());
        if r.width < 0.11 {
            assert!((r.ratio - 0.5).abs() < 0.05, "{r:?}");
        }
    }
    for pair in table.rows.windows(2) {
        assert!((pair[1].ratio - 0.5).abs() < (pair[0].ratio - 0.5).abs());
        assert!(pair[1].hamiltonian_drift < pair[0].hamiltonian_drift);
        if pair[1].width < 0.11 {
            let hr = pair[1].halving_ratio.unwrap();
            assert!((hr - 0.5).abs() < 0.05, "{hr}");
        }
    }

    let frictionless = window_shrink_study(&fp(0.0, 0.0, 1.0, 16), &path, &windows).unwrap();
    assert!(frictionless.rows.iter().all(|r| r.friction_energy == 0.0 && r.p_half == 0.0));

    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("width,midpoint,friction_energy,first_order_estimate,ratio,p_half,halving_ratio,hamiltonian_drift"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn window_study_rejects_bad_windows() {
    let f = fp(1.0, 0.0, 1.0, 16);
    let growing = vec![Grid::new(0.9, 1.1, 16).unwrap(), Grid::new(0.8, 1.2, 16).unwrap()];
    assert!(matches!(window_shrink_study(&f, &path, &growing), Err(Error::InvalidArgument(_))));
    let shifted = vec![Grid::new(0.8, 1.2, 16).unwrap(), Grid::new(0.95, 1.15, 16).unwrap()];
    assert!(matches!(window_shrink_study(&f, &path, &shifted), Err(Error::InvalidArgument(_))));
    let odd = vec![Grid::new(0.8, 1.2, 15).unwrap()];
    assert!(matches!(window_shrink_study(&f, &path, &odd), Err(Error::InvalidGrid(_))));
    assert!(window_shrink_study(&f, &path, &[]).is_err());
}

#[test]
fn damped_motion_from_rest_potential() {
    let f = FrictionProblem::new(1.0, 1.0, Polynomial::new(vec![]), Grid::new(0.0, 1.0, 16).unwrap()).unwrap();
    let sim = simulate_damped_eom(&f, 0.0, 1.0, 1.0, 1000).unwrap();
    assert!((sim.value(1000, 0) - (1.0 - (-1.0f64).exp())).abs() < 1e-8);
    assert!((sim.value(1000, 1) - (-1.0f64).exp()).abs() < 1e-8);
}

#[test]
fn undamped_oscillator_keeps_its_energy() {
    let f = FrictionProblem::new(1.0, 0.0, Polynomial::new(vec![0.0, 0.0, 0.5]), Grid::new(0.0, 1.0, 16).unwrap()).unwrap();
    let sim = simulate_damped_eom(&f, 1.0, 0.5, 10.0, 10_000).unwrap();
    let e0 = 0.5 * (1.0 + 0.25);
    for i in 0..=10_000 {
        let e = 0.5 * (sim.value(i, 0).powi(2) + sim.value(i, 1).powi(2));
        assert!((e - e0).abs() < 1e-8);
    }
}

#[test]
fn simulation_errors() {
    let f = FrictionProblem::new(1.0, 0.0, Polynomial::new(vec![0.0, 0.0, -50.0]), Grid::new(0.0, 1.0, 16).unwrap()).unwrap();
    assert!(matches!(simulate_damped_eom(&f, 1.0, 0.0, 10.0, 100), Err(Error::Unstable { .. })));
    assert!(matches!(simulate_damped_eom(&f, 1.0, 0.0, 1.0, 8), Err(Error::InvalidArgument(_))));
    assert!(FrictionProblem::new(0.0, 1.0, Polynomial::new(vec![]), Grid::new(0.0, 1.0, 4).unwrap()).is_err());
    assert!(FrictionProblem::new(1.0, -1.0, Polynomial::new(vec![]), Grid::new(0.0, 1.0, 4).unwrap()).is_err());
}

#[test]
fn equation_of_motion_is_the_negated_euler_lagrange_residual() {
    let f = fp(0.8, 0.0, 1.0, 64);
    let vp = f.variational_problem(0.0, 1.0).unwrap();
    let q = GridFunction::from_fn(*f.window(), |t| t * t + 0.3 * (3.0 * t).sin()).unwrap();
    let eom = eom_residual(&f, &q).unwrap();
    let el = vp.el_residual(&q).unwrap();
    for i in 0..=64 {
        assert!((eom.value(i, 0) + el.value(i, 0)).abs() < 1e-10, "node {i}");
    }
}

#[test]
fn eom_residual_against_operator_oracle() {
    let f = fp(0.8, 0.0, 1.0, 128);
    let qf = |t: f64| t * t + 0.3 * (3.0 * t).sin();
    let q = GridFunction::from_fn(*f.window(), qf).unwrap();
    let r = eom_residual(&f, &q).unwrap();
    // m q̈ - γ RL_right(C q) - F from independent operators, away from b
    let w = caputo_left(&q, FractionalOrder::derivative(0.5).unwrap()).unwrap();
    let rl = rl_derivative_right(&w, FractionalOrder::derivative(0.5).unwrap()).unwrap();
    for i in (16..=96).step_by(16) {
        let t = f.window().node(i);
        let qdd = 2.0 - 2.7 * (3.0 * t).sin();
        let expect = 1.3 * qdd - 0.8 * rl.value(i, 0) - f.force(qf(t));
        assert!((r.value(i, 0) - expect).abs() < 2e-3, "t={t}");
    }
}

#[test]
fn defect_rate_matches_friction_power() {
    // along an extremal d/dt (γ/2 w² - H) = -q̇ γ RL_right(w)
    let n = 256;
    let f = fp(0.6, 0.0, 1.0, n);
    let vp = f.variational_problem(0.0, 0.8).unwrap();
    let q = solve_extremal(&vp, None).unwrap().trajectory;
    let d = friction_diagnostics(&f, &q).unwrap();
    let h = f.window().step();
    let rate = central_diff(d.noether_defect.values(), h);
    let v = central_diff(q.values(), h);
    let rl = rl_derivative_right(&d.p_half, FractionalOrder::derivative(0.5).unwrap()).unwrap();
    let (mut gap, mut scale) = (0.0f64, 0.0f64);
    for i in (n / 5)..=(4 * n / 5) {
        let expect = -v[i] * rl.value(i, 0);
        gap = gap.max((rate[i] - expect).abs());
        scale = scale.max(expect.abs());
    }
    assert!(scale > 0.05);
    assert!(gap < 0.02 * scale, "gap {gap} scale {scale}");
}

#[test]
fn friction_breaks_energy_conservation() {
    let drift = |gamma: f64| {
        let f = fp(gamma, 0.0, 1.0, 256);
        let q = solve_extremal(&f.variational_problem(0.0, 1.0).unwrap(), None).unwrap().trajectory;
        drift_report(&friction_diagnostics(&f, &q).unwrap().hamiltonian).unwrap()
    };
    let (d0, d1) = (drift(0.0), drift(1.0));
    assert!(d1 > 10.0 * d0, "{d0} {d1}");
}

#[test]
fn diagnostics_csv_and_grid_checks() {
    let f = fp(0.5, 0.0, 1.0, 8);
    let q = GridFunction::from_fn(*f.window(), |t| t).unwrap();
    let mut buf = Vec::new();
    friction_diagnostics(&f, &q).unwrap().write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,p,p_half,H,noether_defect");
    assert_eq!(text.lines().count(), 10);
    let other = GridFunction::from_fn(Grid::new(0.0, 1.0, 9).unwrap(), |t| t).unwrap();
    assert!(matches!(friction_diagnostics(&f, &other), Err(Error::InvalidGrid(_))));
}
