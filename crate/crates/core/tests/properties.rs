use proptest::prelude::*;

use fluxlim_core::expr::Expression;
use fluxlim_core::fl::{solve_fl, FlParams, FlScheme, Start};
use fluxlim_core::grid::Grid;
use fluxlim_core::hamiltonian::FluxLimiter;
use fluxlim_core::junction::{Case, NormalProfile};
use fluxlim_core::random::{random_affine_config, rng};
use fluxlim_core::regional::{solve_regional, RegionalParams, Variant};
use fluxlim_core::scenario::Scenario;
use fluxlim_core::viscous::{constant_bounds, solve_viscous, ViscousParams};

fn family(seed: u64) -> Scenario {
    Scenario::from_config(random_affine_config(&mut rng(seed), "prop")).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn affine_expressions_evaluate_exactly(c in -5.0..5.0f64, k in -5.0..5.0f64, x in -2.0..2.0f64, a in -1.0..1.0f64) {
        let e = Expression::parse(&format!("{c:?}*a1 + ({k:?})*x1 - pow(2, 2)"), 1, 1).unwrap();
        let v = e.evaluate(&[x], &[a]).unwrap();
        prop_assert!((v - (c * a + k * x - 4.0)).abs() <= 1e-12);
    }

    #[test]
    fn tangential_hamiltonians_are_ordered(seed in any::<u64>()) {
        let p = NormalProfile::at(&family(seed), &[0.0], 0.0, None).unwrap();
        let r = p.report(None).unwrap();
        prop_assert!(r.ht >= r.ht_reg - 1e-8);
        prop_assert!(r.ht_reg >= r.underline_h1.max(r.underline_h2) - 1e-8);
        if r.case == Case::Case3 {
            prop_assert!((r.ht - r.ht_reg).abs() <= 1e-8);
        }
    }

    #[test]
    fn level_roots_solve_and_separate(seed in any::<u64>(), lift in 0.01..3.0f64) {
        let p = NormalProfile::at(&family(seed), &[0.0], 0.0, None).unwrap();
        let floor = p.ht_reg().unwrap()
            .max(p.underline_and_flat(1).unwrap().underline)
            .max(p.underline_and_flat(2).unwrap().underline);
        let level = floor + lift;
        let (l1, l2) = p.lambda_pair(level).unwrap();
        prop_assert!((p.f1(l1) - level).abs() <= 1e-9);
        prop_assert!((p.f2(l2) - level).abs() <= 1e-9);
        prop_assert!(l2 < l1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fl_scheme_is_monotone(seed in any::<u64>(), k in 1usize..40, delta in 1e-3..1.0f64) {
        let s = family(seed);
        let g = Grid::new(1, 1.0, 0.05).unwrap();
        let scheme = FlScheme::new(&s, &g, FluxLimiter::HtReg).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|j| (j as f64 * 0.37).sin()).collect();
        let base = scheme.residual_at(&u, k);
        for j in [k - 1, k + 1] {
            let mut v = u.clone();
            v[j] += delta;
            prop_assert!(scheme.residual_at(&v, k) <= base + 1e-12);
        }
        let mut v = u.clone();
        v[k] += delta;
        prop_assert!(scheme.residual_at(&v, k) >= base + delta - 1e-12);
    }

    #[test]
    fn fl_solution_forgets_its_start(seed in any::<u64>(), c in 1.0..20.0f64) {
        let s = family(seed);
        let g = Grid::new(1, 1.0, 0.05).unwrap();
        let start = |v: f64| FlParams { u0: Some(Start::Constant(v)), ..FlParams::default() };
        let hi = solve_fl(&s, &g, FluxLimiter::None, &start(c)).unwrap();
        let lo = solve_fl(&s, &g, FluxLimiter::None, &start(-c)).unwrap();
        prop_assert!(hi.sup_distance(&lo, 0.0) <= 1e-7);
    }

    #[test]
    fn regular_values_dominate(seed in any::<u64>()) {
        let s = family(seed);
        let g = Grid::new(1, 1.0, 0.05).unwrap();
        let minus = solve_regional(&s, &g, Variant::Minus, &RegionalParams::default()).unwrap();
        let plus = solve_regional(&s, &g, Variant::Plus, &RegionalParams::default()).unwrap();
        for (a, b) in minus.values.iter().zip(&plus.values) {
            prop_assert!(*a <= *b + 1e-7);
        }
    }

    #[test]
    fn viscous_maximum_principle(seed in any::<u64>(), eta in 0.05..0.3f64) {
        let s = family(seed);
        let g = Grid::new(1, 1.0, 0.05).unwrap();
        let (lo, hi) = constant_bounds(&s, &g).unwrap();
        let u = solve_viscous(&s, &g, &ViscousParams::new(eta)).unwrap();
        prop_assert!(u.values.iter().all(|&v| v >= lo - 1e-8 && v <= hi + 1e-8));
    }
}
