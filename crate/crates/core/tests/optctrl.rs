use fracnoether::noether::{autonomous_quantity, drift_report, noether_quantity, SymmetryGroup};
use fracnoether::optctrl::*;
use fracnoether::variational::{solve_extremal, Harmonic, LagrangianSpec, Polynomial, QuadraticForm, VariationalProblem};
use fracnoether::{Error, FractionalOrder, Grid, GridFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn der(a: f64) -> FractionalOrder {
    FractionalOrder::derivative(a).unwrap()
}

/// Backward RK4 for `-P' = 2aP + s - b²P²/r`, `P(T) = 0`; returns `P` on
/// `steps + 1` equally spaced nodes.
fn riccati(s: f64, r: f64, a: f64, b: f64, t_end: f64, steps: usize) -> Vec<f64> {
    let f = |p: f64| 2.0 * a * p + s - b * b * p * p / r;
    let h = t_end / steps as f64;
    let mut out = vec![0.0; steps + 1];
    let mut p = 0.0;
    for i in (0..steps).rev() {
        let k1 = f(p);
        let k2 = f(p + 0.5 * h * k1);
        let k3 = f(p + 0.5 * h * k2);
        let k4 = f(p + h * k3);
        p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out[i] = p;
    }
    out
}

fn lq_problem(n: usize) -> ControlProblem {
    let sys = ControlSpec::new(PolynomialControl::linear_quadratic(1.0, 1.0, 0.5, 1.0)).unwrap();
    ControlProblem::new(sys, der(1.0), Grid::new(0.0, 1.0, n).unwrap(), vec![1.0]).unwrap()
}

fn fractional_problem(n: usize) -> ControlProblem {
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
    ControlProblem::new(ControlSpec::new(sys).unwrap(), der(0.5), Grid::new(0.0, 1.0, n).unwrap(), vec![1.0]).unwrap()
}

#[test]
fn linear_quadratic_matches_riccati() {
    let n = 64;
    let cp = lq_problem(n);
    let sol = solve_control(&cp).unwrap();
    let p = riccati(1.0, 1.0, 0.5, 1.0, 1.0, 64 * n);
    assert!((sol.cost - 0.5 * p[0]).abs() < 1e-3, "{} vs {}", sol.cost, 0.5 * p[0]);
    // p(t) = P(t) q(t) and u = -p
    for i in (n / 8..=7 * n / 8).step_by(n / 8) {
        let pi = p[64 * i] * sol.state.q.value(i, 0);
        assert!((sol.state.p.value(i, 0) - pi).abs() < 1e-2, "node {i}");
        assert!((sol.state.u.value(i, 0) + sol.state.p.value(i, 0)).abs() < 1e-2, "node {i}");
    }
    assert_eq!(sol.state.p.value(n, 0), 0.0);
    assert!(sol.rounds.windows(2).all(|w| w[1].defect() < w[0].defect()));
}

#[test]
fn classical_hamiltonian_is_conserved() {
    let cp = lq_problem(64);
    let sol = solve_control(&cp).unwrap();
    let h = hamiltonian_along(&cp, &sol.state).unwrap();
    assert!(drift_report(&h).unwrap() < 1e-3);
    // α = 1: the corrected Hamiltonian is H itself
    assert_eq!(autonomous_control_quantity(&cp, &sol.state).unwrap(), h);
    assert!(sol.state.p_alpha.values().iter().all(|&x| x == 0.0));
    assert_eq!(sol.state.mu.dim(), 0);
}

#[test]
fn control_form_of_a_variational_problem_has_the_same_optimum() {
    for (l, alpha, b, qb) in [
        (LagrangianSpec::new(QuadraticForm { dim: 1, vv: 1.0, ww: 1.0, ..Default::default() }).unwrap(), 0.5, 1.0, 1.0),
        (LagrangianSpec::new(Harmonic { dim: 1, mass: 1.0, stiffness: 1.0 }).unwrap(), 1.0, 1.0, 0.5),
    ] {
        let vp = VariationalProblem::new(l, Grid::new(0.0, b, 64).unwrap(), der(alpha), vec![0.0], vec![qb]).unwrap();
        let ext = solve_extremal(&vp, None).unwrap();
        let cp = ControlProblem::reduction_of(&vp).unwrap();
        let sol = solve_control(&cp).unwrap();
        assert!((sol.cost - ext.action).abs() < 1e-3, "α={alpha}: {} vs {}", sol.cost, ext.action);
    }
}

#[test]
fn reduction_identities_on_random_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
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
        let vp = VariationalProblem::new(LagrangianSpec::new(l).unwrap(), Grid::new(0.0, 1.0, 64).unwrap(), der(alpha), vec![0.0], vec![1.0]).unwrap();
        let (c1, c2, c3) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(1.0..4.0));
        let q = GridFunction::from_fn(*vp.grid(), |t| t + c1 * t * (1.0 - t) + c2 * (c3 * t).sin() * t).unwrap();
        let cp = ControlProblem::reduction_of(&vp).unwrap();
        let st = PontryaginState::from_variational(&vp, &q).unwrap();

        let corrected = autonomous_control_quantity(&cp, &st).unwrap();
        let direct = autonomous_quantity(&vp, &q).unwrap();
        let s = SymmetryGroup::space_translation(vec![1.0]).unwrap();
        let cq = control_noether_quantity(&cp, &st, &s, 3).unwrap();
        let vq = noether_quantity(&vp, &q, &s, 3).unwrap();
        let res = pontryagin_residuals(&cp, &st).unwrap();
        let el = vp.el_residual(&q).unwrap();
        for i in 0..=64 {
            assert!((corrected.value(i, 0) - direct.value(i, 0)).abs() < 1e-10);
            if vq.value(i, 0).is_finite() {
                assert!((cq.value(i, 0) - vq.value(i, 0)).abs() < 1e-10, "node {i}");
            }
            if (1..64).contains(&i) {
                assert!((res.costate.value(i, 0) - el.value(i, 0)).abs() < 1e-10, "node {i}");
            }
        }
        let [r1, r2, _, r4, r5] = res.norms();
        assert!(r1 < 1e-12 && r2 < 1e-12 && r4 < 1e-12 && r5 < 1e-12);
    }
}

#[test]
fn time_translation_gives_the_corrected_hamiltonian() {
    let cp = fractional_problem(32);
    let sol = solve_control(&cp).unwrap();
    let s = SymmetryGroup::time_translation(1).unwrap();
    let c = control_noether_quantity(&cp, &sol.state, &s, 4).unwrap();
    let a = autonomous_control_quantity(&cp, &sol.state).unwrap();
    for i in 0..=32 {
        assert!((c.value(i, 0) - a.value(i, 0)).abs() < 1e-14);
    }
}

fn interior_max(g: &GridFunction) -> f64 {
    let n = g.grid().intervals();
    (n / 5..=4 * n / 5).map(|i| g.value(i, 0).abs()).fold(0.0, f64::max)
}

#[test]
fn fractional_solution_satisfies_the_dynamics() {
    let mut frac = Vec::new();
    for n in [32usize, 64, 128] {
        let cp = fractional_problem(n);
        let sol = solve_control(&cp).unwrap();
        let res = pontryagin_residuals(&cp, &sol.state).unwrap();
        let defect = sol.final_defect();
        assert!(defect < 1e-4, "{defect}");
        if n >= 64 {
            assert!(interior_max(&res.velocity) < 10.0 * defect);
        }
        assert!(res.control.max_norm() < 1e-6 && res.fractional_control.max_norm() < 1e-6);
        // the nodal Caputo stencil differs from the cell one by O(h^{3/2})
        frac.push(interior_max(&res.fractional_velocity));
        if n == 64 {
            let h = drift_report(&hamiltonian_along(&cp, &sol.state).unwrap()).unwrap();
            let c = drift_report(&autonomous_control_quantity(&cp, &sol.state).unwrap()).unwrap();
            assert!(h >= c, "{h} {c}");
        }
    }
    for w in frac.windows(2) {
        assert!((w[0] / w[1]).log2() > 1.2, "{frac:?}");
    }
}

#[test]
fn zero_cost_without_fractional_dynamics() {
    let sys = PolynomialControl { dim: 2, velocity_u: 1.0, ..PolynomialControl::linear_quadratic(0.0, 0.0, 0.0, 1.0) };
    let cp = ControlProblem::new(ControlSpec::new(sys).unwrap(), der(0.7), Grid::new(0.0, 1.0, 16).unwrap(), vec![0.3, -0.2]).unwrap();
    let sol = solve_control(&cp).unwrap();
    assert_eq!(sol.cost, 0.0);
    for i in 0..=16 {
        assert!((sol.state.q.value(i, 0) - 0.3).abs() < 1e-8 && (sol.state.q.value(i, 1) + 0.2).abs() < 1e-8);
    }
    assert!(pontryagin_residuals(&cp, &sol.state).unwrap().norms().iter().all(|&x| x < 1e-6));
}

#[test]
fn control_csv_columns() {
    let cp = fractional_problem(8);
    let sol = solve_control(&cp).unwrap();
    let mut buf = Vec::new();
    write_control_csv(&cp, &sol.state, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,q,u,mu,p,p_alpha,H,invariant");
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn argument_errors() {
    let cp = lq_problem(8);
    assert!(matches!(cp.clone().with_terminal(vec![1.0, 2.0]), Err(Error::DimensionMismatch(_))));
    let sys = ControlSpec::new(PolynomialControl::linear_quadratic(1.0, 1.0, 0.0, 1.0)).unwrap();
    assert!(ControlProblem::new(sys.clone(), der(1.0), Grid::new(0.0, 1.0, 8).unwrap(), vec![f64::NAN]).is_err());
    let big = ControlProblem::new(sys, der(1.0), Grid::new(0.0, 1.0, MAX_INTERVALS + 2).unwrap(), vec![0.0]).unwrap();
    assert!(matches!(solve_control(&big), Err(Error::InvalidGrid(_))));
    let opts = ControlOptions { rounds: 0, ..Default::default() };
    assert!(matches!(solve_control_with(&cp, &opts), Err(Error::InvalidArgument(_))));
    let other = GridFunction::zeros(Grid::new(0.0, 1.0, 4).unwrap(), 1);
    let st = PontryaginState { q: other.clone(), u: other.clone(), mu: GridFunction::zeros(Grid::new(0.0, 1.0, 4).unwrap(), 0), p: other.clone(), p_alpha: other };
    assert!(matches!(hamiltonian(&cp, &st, 0), Err(Error::InvalidGrid(_))));
}
