mod common;

use approx::assert_relative_eq;
use fracnoether::fracops::{self, gl};
use fracnoether::{Error, FractionalOrder, Grid, GridFunction};
use proptest::prelude::*;

fn der(a: f64) -> FractionalOrder {
    FractionalOrder::derivative(a).unwrap()
}

fn int(b: f64) -> FractionalOrder {
    FractionalOrder::integral(b).unwrap()
}

fn sample(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> GridFunction {
    GridFunction::from_fn(Grid::new(a, b, n).unwrap(), f).unwrap()
}

#[test]
fn oracle_gamma_agrees_with_library() {
    for x in [0.1, 0.5, 0.75, 1.5, 2.5, 3.3, 7.9, 9.99] {
        assert_relative_eq!(fracnoether::gamma::gamma(x), common::gamma(x), max_relative = 1e-13);
    }
}

#[test]
fn left_integral_matches_quadrature_oracle() {
    let f = |t: f64| (2.0 * t).sin() + t * t;
    for beta in [0.3, 0.5, 1.0, 1.7, 2.5] {
        let g = sample(0.0, 1.0, 512, f);
        let r = fracops::rl_integral_left(&g, int(beta)).unwrap();
        for i in (0..=512).step_by(64) {
            let t = g.grid().node(i);
            let exact = common::rl_integral_left(f, 0.0, t, beta);
            assert!((r.value(i, 0) - exact).abs() < 2e-5, "beta={beta} t={t}: {} vs {exact}", r.value(i, 0));
        }
    }
}

#[test]
fn right_integral_matches_quadrature_oracle() {
    let f = |t: f64| (-t).exp() * (1.0 + t);
    for beta in [0.25, 0.5, 1.0, 2.0] {
        let g = sample(-0.5, 1.5, 512, f);
        let r = fracops::rl_integral_right(&g, int(beta)).unwrap();
        for i in (0..=512).step_by(64) {
            let t = g.grid().node(i);
            let exact = common::rl_integral_right(f, t, 1.5, beta);
            assert!((r.value(i, 0) - exact).abs() < 2e-5, "beta={beta} t={t}");
        }
    }
}

#[test]
fn caputo_matches_quadrature_oracle_on_smooth_function() {
    let f = |t: f64| (1.5 * t).cos();
    let df = |t: f64| -1.5 * (1.5 * t).sin();
    for alpha in [0.2, 0.5, 0.8] {
        let g = sample(0.0, 2.0, 1024, f);
        let left = fracops::caputo_left(&g, der(alpha)).unwrap();
        let right = fracops::caputo_right(&g, der(alpha)).unwrap();
        for i in (0..=1024).step_by(128) {
            let t = g.grid().node(i);
            assert!((left.value(i, 0) - common::caputo_left(df, 0.0, t, alpha)).abs() < 2e-3, "left alpha={alpha} t={t}");
            assert!((right.value(i, 0) - common::caputo_right(df, t, 2.0, alpha)).abs() < 2e-3, "right alpha={alpha} t={t}");
        }
    }
}

#[test]
fn rl_derivative_matches_oracle_away_from_singular_node() {
    let f = |t: f64| 1.0 + t * t;
    let df = |t: f64| 2.0 * t;
    let alpha = 0.4;
    let g = sample(0.0, 1.0, 512, f);
    let left = fracops::rl_derivative_left(&g, der(alpha)).unwrap();
    let right = fracops::rl_derivative_right(&g, der(alpha)).unwrap();
    assert!(left.is_flagged(0) && right.is_flagged(512));
    for i in (32..=480).step_by(32) {
        let t = g.grid().node(i);
        let gam = common::gamma(1.0 - alpha);
        let exact_l = common::caputo_left(df, 0.0, t, alpha) + f(0.0) * t.powf(-alpha) / gam;
        let exact_r = common::caputo_right(df, t, 1.0, alpha) + f(1.0) * (1.0 - t).powf(-alpha) / gam;
        assert!((left.value(i, 0) - exact_l).abs() < 1e-3, "t={t}");
        assert!((right.value(i, 0) - exact_r).abs() < 1e-3, "t={t}");
    }
}

#[test]
fn power_rule_converges_at_expected_order() {
    let ns = [64, 128, 256, 512];
    for k in 1..=3 {
        for alpha in [0.3, 0.5, 0.7] {
            let c = common::gamma(k as f64 + 1.0) / common::gamma(k as f64 + 1.0 - alpha);
            let exact = |t: f64| c * t.powf(k as f64 - alpha);
            let errs: Vec<f64> = ns
                .iter()
                .map(|&n| {
                    let g = sample(0.0, 1.0, n, |t| t.powi(k));
                    let d = fracops::caputo_left(&g, der(alpha)).unwrap();
                    common::max_error_on(&g.grid().nodes(), d.values(), exact, 0.0, 1.0)
                })
                .collect();
            if k == 1 {
                // the L1 scheme is exact on linear functions
                assert!(errs.iter().all(|e| *e < 1e-12), "{errs:?}");
                continue;
            }
            let order = common::observed_order(&ns, &errs);
            assert!(order >= 2.0 - alpha - 0.2, "k={k} alpha={alpha} order={order} errs={errs:?}");
        }
    }
}

#[test]
fn grunwald_letnikov_cross_check() {
    let f = |t: f64| t * t * (1.5 - t);
    for alpha in [0.3, 0.6, 0.9] {
        let diffs: Vec<f64> = [256usize, 512, 1024]
            .iter()
            .map(|&n| {
                let g = sample(0.0, 1.0, n, f);
                let l1 = fracops::caputo_left(&g, der(alpha)).unwrap();
                let glc = gl::caputo_left(&g, der(alpha)).unwrap();
                l1.combine(1.0, &glc, -1.0).unwrap().max_norm()
            })
            .collect();
        assert!(diffs[2] < 1e-2, "alpha={alpha}: {diffs:?}");
        assert!(diffs[2] < diffs[0], "alpha={alpha}: {diffs:?}");
        let g = sample(0.0, 1.0, 1024, f);
        let r1 = fracops::caputo_right(&g, der(alpha)).unwrap();
        let r2 = gl::caputo_right(&g, der(alpha)).unwrap();
        assert!(r1.combine(1.0, &r2, -1.0).unwrap().max_norm() < 1e-2);
    }
}

#[test]
fn classical_limit_on_cubics() {
    let g = sample(-1.0, 2.0, 90, |t| 2.0 - t + 0.5 * t * t - 0.3 * t * t * t);
    let cd = fracnoether::calculus::central_diff(g.values(), g.grid().step());
    let one = der(1.0);
    for out in [fracops::caputo_left(&g, one), fracops::rl_derivative_left(&g, one)] {
        let out = out.unwrap();
        for i in 0..g.len() {
            assert!((out.value(i, 0) - cd[i]).abs() < 1e-10);
        }
    }
    for out in [fracops::caputo_right(&g, one), fracops::rl_derivative_right(&g, one)] {
        let out = out.unwrap();
        for i in 0..g.len() {
            assert!((out.value(i, 0) + cd[i]).abs() < 1e-10);
        }
    }
    // order-one integral is the trapezoidal antiderivative
    let i1 = fracops::rl_integral_left(&g, int(1.0)).unwrap();
    let h = g.grid().step();
    let mut acc = 0.0;
    for i in 1..g.len() {
        acc += 0.5 * h * (g.value(i - 1, 0) + g.value(i, 0));
        assert!((i1.value(i, 0) - acc).abs() < 1e-12);
    }
}

#[test]
fn caputo_rl_relation_away_from_base_node() {
    let g = sample(0.0, 1.0, 128, |t| 2.0 + t.sin());
    for alpha in [0.25, 0.75] {
        let c = fracops::caputo_left(&g, der(alpha)).unwrap();
        let r = fracops::rl_derivative_left(&g, der(alpha)).unwrap();
        for i in 1..g.len() {
            let t = g.grid().node(i);
            let shift = 2.0 * t.powf(-alpha) / common::gamma(1.0 - alpha);
            assert!((r.value(i, 0) - c.value(i, 0) - shift).abs() < 1e-12 * (1.0 + shift));
        }
    }
}

#[test]
fn integration_by_parts_residual_shrinks() {
    let mut prev = f64::INFINITY;
    for n in [64usize, 128, 256, 512, 1024] {
        let f = sample(0.0, 1.0, n, |t| t * (1.0 - t));
        let g = sample(0.0, 1.0, n, |t| t + 1.0);
        let r = fracops::ibp_residual(&f, &g, der(0.5)).unwrap();
        assert!(prev / r >= 1.8, "n={n}: {prev} -> {r}");
        prev = r;
    }
}

#[test]
fn integration_by_parts_examples() {
    let n = 256;
    let h = 1.0 / n as f64;
    let f = sample(0.0, 1.0, n, |t| t * (1.0 - t));
    let one = sample(0.0, 1.0, n, |_| 1.0);
    assert!(fracops::ibp_residual(&f, &one, der(0.5)).unwrap() < 10.0 * h);
    let zero = GridFunction::zeros(*f.grid(), 1);
    assert_eq!(fracops::ibp_residual(&zero, &one, der(0.5)).unwrap(), 0.0);
    let s = sample(0.0, 1.0, n, |t| (std::f64::consts::PI * t).sin());
    let t = sample(0.0, 1.0, n, |t| t);
    assert!(fracops::ibp_residual(&s, &t, der(1.0)).unwrap() < 10.0 * h * h);
    let bad = sample(0.0, 1.0, n, |t| t);
    assert!(matches!(fracops::ibp_residual(&bad, &one, der(0.5)), Err(Error::Boundary(_))));
}

#[test]
fn orders_out_of_range_rejected() {
    assert!(FractionalOrder::derivative(0.0).is_err());
    assert!(FractionalOrder::derivative(1.2).is_err());
    assert!(FractionalOrder::integral(0.0).is_err());
    assert!(FractionalOrder::integral(-1.0).is_err());
    assert!(FractionalOrder::integral(3.5).is_ok());
}

#[test]
fn csv_round_trip_is_exact() {
    let g = GridFunction::from_fn_vec(Grid::new(0.0, 1.0, 7).unwrap(), 2, |t| vec![t.exp(), 1.0 / 3.0 - t]).unwrap();
    let mut buf = Vec::new();
    g.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("t,v0,v1\n"));
    let back = GridFunction::read_csv(&buf[..]).unwrap();
    assert_eq!(back, g);
}

fn poly(c: &[f64]) -> impl Fn(f64) -> f64 + '_ {
    move |t| c.iter().rev().fold(0.0, |acc, k| acc * t + k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operators_are_linear(
        c1 in proptest::collection::vec(-2.0f64..2.0, 4),
        c2 in proptest::collection::vec(-2.0f64..2.0, 4),
        k1 in -3.0f64..3.0,
        k2 in -3.0f64..3.0,
        alpha in 0.05f64..1.0,
    ) {
        let grid = Grid::new(0.0, 1.0, 40).unwrap();
        let f1 = GridFunction::from_fn(grid, poly(&c1)).unwrap();
        let f2 = GridFunction::from_fn(grid, poly(&c2)).unwrap();
        let mix = f1.combine(k1, &f2, k2).unwrap();
        let a = der(alpha);
        type Op = fn(&GridFunction, FractionalOrder) -> fracnoether::Result<GridFunction>;
        let ops: [(Op, FractionalOrder); 6] = [
            (fracops::caputo_left, a),
            (fracops::caputo_right, a),
            (fracops::rl_derivative_left, a),
            (fracops::rl_derivative_right, a),
            (fracops::rl_integral_left, int(alpha + 0.7)),
            (fracops::rl_integral_right, int(alpha + 0.7)),
        ];
        for (op, ord) in ops {
            let lhs = op(&mix, ord).unwrap();
            let rhs = op(&f1, ord).unwrap().combine(k1, &op(&f2, ord).unwrap(), k2).unwrap();
            for i in 0..grid.len() {
                let (x, y) = (lhs.value(i, 0), rhs.value(i, 0));
                if x.is_finite() && y.is_finite() {
                    prop_assert!((x - y).abs() <= 1e-11 * (1.0 + x.abs()), "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn right_operators_are_reflected_left_operators(
        c in proptest::collection::vec(-2.0f64..2.0, 4),
        alpha in 0.05f64..1.0,
    ) {
        let grid = Grid::new(-1.0, 2.0, 30).unwrap();
        let f = GridFunction::from_fn(grid, poly(&c)).unwrap();
        let fr = GridFunction::from_fn(grid, |t| poly(&c)(1.0 - t)).unwrap();
        let il = fracops::rl_integral_left(&fr, int(alpha)).unwrap();
        let ir = fracops::rl_integral_right(&f, int(alpha)).unwrap();
        let cl = fracops::caputo_left(&fr, der(alpha)).unwrap();
        let cr = fracops::caputo_right(&f, der(alpha)).unwrap();
        let n = grid.intervals();
        for i in 0..=n {
            prop_assert!((ir.value(i, 0) - il.value(n - i, 0)).abs() <= 1e-12 * (1.0 + ir.value(i, 0).abs()));
            prop_assert!((cr.value(i, 0) - cl.value(n - i, 0)).abs() <= 1e-12 * (1.0 + cr.value(i, 0).abs()));
        }
    }

    #[test]
    fn caputo_annihilates_constants(c in -100.0f64..100.0, alpha in 0.01f64..1.0) {
        let f = sample(0.0, 3.0, 25, |_| c);
        prop_assert!(fracops::caputo_left(&f, der(alpha)).unwrap().max_norm() <= 1e-12 * (1.0 + c.abs()));
        prop_assert!(fracops::caputo_right(&f, der(alpha)).unwrap().max_norm() <= 1e-12 * (1.0 + c.abs()));
    }
}
