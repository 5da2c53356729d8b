use std::f64::consts::PI;
use std::sync::Arc;

use fracscheme::caputo::{discrete_caputo, weights, FractionalParams, PointHistory};
use fracscheme::operators::{Boundary, Coefficient, Grid, GridField, OperatorSpec};
use fracscheme::resolvent::{solve_resolvent, ResolventProblem};
use fracscheme::special::{gamma, mittag_leffler};
use fracscheme::stepper::{barrier_margin, check_monotone, run};
use proptest::prelude::*;

fn periodic(n: usize) -> Arc<Grid> {
    Arc::new(Grid::new_1d(n, 0.0, 2.0, Boundary::Periodic).unwrap())
}

fn spec_of(kind: usize) -> OperatorSpec {
    match kind {
        0 => OperatorSpec::linear_diffusion(
            Coefficient::analytic("a", |x, _| 0.2 + (PI * x[0]).sin().powi(2)),
            vec![Coefficient::analytic("b", |x, _| (PI * x[0]).cos())],
            Coefficient::Constant(0.5),
        )
        .unwrap(),
        1 => OperatorSpec::eikonal(Coefficient::Constant(1.0), Coefficient::Constant(0.3)).unwrap(),
        _ => OperatorSpec::pucci_maximal(0.5, 2.0).unwrap(),
    }
}

fn modes() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, 0.0..6.3f64), 1..4)
}

fn field(grid: &Arc<Grid>, modes: &[(f64, f64)], shift: f64) -> GridField {
    GridField::from_fn(grid.clone(), |x| {
        shift
            + modes
                .iter()
                .enumerate()
                .map(|(k, (c, ph))| c * (PI * (k + 1) as f64 * x[0] + ph).sin())
                .sum::<f64>()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_are_a_probability_row(alpha in 0.01..0.99f64, m in 1usize..600) {
        let row = weights(m, alpha).unwrap();
        prop_assert!(row.coeffs().iter().all(|&c| c >= 0.0));
        prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(row.coeffs()[1..].windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn discrete_caputo_ignores_constants(alpha in 0.05..0.95f64, h in 1e-3..1.0f64, c in -5.0..5.0f64,
                                          vals in prop::collection::vec(-3.0..3.0f64, 2..40)) {
        let p = FractionalParams::new(alpha, h).unwrap();
        let base = discrete_caputo(&PointHistory::new(vals.clone()).unwrap(), &p).unwrap();
        let shifted = discrete_caputo(&PointHistory::new(vals.iter().map(|v| v + c).collect()).unwrap(), &p).unwrap();
        prop_assert!((base - shifted).abs() <= 1e-9 * (1.0 + base.abs()));
        let flat = discrete_caputo(&PointHistory::new(vec![c; vals.len()]).unwrap(), &p).unwrap();
        prop_assert_eq!(flat, 0.0);
    }

    #[test]
    fn exact_on_linear_histories(alpha in 0.05..0.95f64, h in 1e-3..0.5f64, m in 1usize..400) {
        let p = FractionalParams::new(alpha, h).unwrap();
        let got = discrete_caputo(&PointHistory::sampled(|t| t, h, m), &p).unwrap();
        let t = m as f64 * h;
        let want = t.powf(1.0 - alpha) / gamma(2.0 - alpha).unwrap();
        prop_assert!((got - want).abs() <= 1e-10 * want.max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn barrier_lower_bound(alpha in 0.05..0.95f64, h in 1e-4..10.0f64, n in 1usize..300) {
        let p = FractionalParams::new(alpha, h).unwrap();
        prop_assert!(barrier_margin(&p, n).unwrap() >= -1e-12);
    }

    #[test]
    fn gamma_recurrence(x in 0.05..60.0f64) {
        let lhs = gamma(x + 1.0).unwrap();
        let rhs = x * gamma(x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs);
    }

    #[test]
    fn mittag_leffler_decays_on_negative_axis(alpha in 0.1..0.95f64, x in 0.01..40.0f64, dx in 0.01..5.0f64) {
        let a = mittag_leffler(alpha, -x).unwrap();
        let b = mittag_leffler(alpha, -(x + dx)).unwrap();
        prop_assert!(a > 0.0 && a < 1.0);
        prop_assert!(b < a, "E({}) = {} not below E({}) = {}", -(x + dx), b, -x, a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn resolvent_comparison(kind in 0usize..3, mu in 0.5..50.0f64, lo in modes(), lift in modes()) {
        let grid = periodic(32);
        let stencil = Arc::new(spec_of(kind).discretize(grid.clone()).unwrap());
        let g1 = field(&grid, &lo, 0.0);
        let bump = field(&grid, &lift, 0.0);
        let g2 = GridField::new(grid.clone(), g1.values().iter().zip(bump.values()).map(|(a, b)| a + b.abs()).collect()).unwrap();
        let p1 = ResolventProblem::new(stencil.clone(), mu, g1.clone(), 0.3).unwrap();
        let p2 = ResolventProblem::new(stencil, mu, g2.clone(), 0.3).unwrap();
        let (u1, _) = solve_resolvent(&p1, &g1).unwrap();
        let (u2, _) = solve_resolvent(&p2, &g2).unwrap();
        let slack = 10.0 * p1.tol / mu;
        for (a, b) in u1.values().iter().zip(u2.values()) {
            prop_assert!(a <= &(b + slack));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn resolvent_translation_and_uniqueness(kind in 0usize..3, mu in 0.5..50.0f64, m in modes(), c in -3.0..3.0f64) {
        let grid = periodic(32);
        let stencil = Arc::new(spec_of(kind).discretize(grid.clone()).unwrap());
        let g = field(&grid, &m, 0.0);
        let gc = field(&grid, &m, c);
        let p = ResolventProblem::new(stencil.clone(), mu, g.clone(), 0.0).unwrap();
        let pc = ResolventProblem::new(stencil, mu, gc.clone(), 0.0).unwrap();
        let (u, _) = solve_resolvent(&p, &g).unwrap();
        let (uc, _) = solve_resolvent(&pc, &gc).unwrap();
        let (v, _) = solve_resolvent(&p, &GridField::constant(grid.clone(), 5.0).unwrap()).unwrap();
        let slack = 10.0 * p.tol / mu;
        for i in 0..grid.node_count() {
            prop_assert!((uc.values()[i] - u.values()[i] - c).abs() <= slack);
            prop_assert!((v.values()[i] - u.values()[i]).abs() <= slack);
        }
    }

    #[test]
    fn stepping_preserves_order(kind in 0usize..3, alpha in 0.1..0.9f64, lo in modes(), lift in modes()) {
        let grid = periodic(32);
        let low = field(&grid, &lo, 0.0);
        let bump = field(&grid, &lift, 0.0);
        let high = GridField::new(grid.clone(), low.values().iter().zip(bump.values()).map(|(a, b)| a + b.abs()).collect()).unwrap();
        let params = FractionalParams::new(alpha, 0.05).unwrap();
        prop_assert!(check_monotone(&spec_of(kind), grid, low, high, params, 8));
    }

    #[test]
    fn stepping_stays_bounded_and_finite(kind in 0usize..3, alpha in 0.1..0.9f64, m in modes()) {
        let grid = periodic(32);
        let u0 = field(&grid, &m, 0.0);
        let params = FractionalParams::new(alpha, 0.05).unwrap();
        let s = run(&spec_of(kind), grid, u0, params, 8).unwrap();
        prop_assert_eq!(s.history().len(), 9);
        for (k, f) in s.history().iter().enumerate() {
            prop_assert!(f.sup_norm() <= s.uniform_bound(k) + 1e-8);
        }
    }
}
