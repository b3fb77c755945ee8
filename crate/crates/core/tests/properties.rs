use approx::assert_relative_eq;
use proptest::prelude::*;

use freebound::boundary::GcaBoundary;
use freebound::config::RunConfig;
use freebound::model::{ModelParams, Problem};
use freebound::primal::PrimalSolver;
use freebound::utility::{DualUtilityFamily, UtilitySpec};

fn market() -> impl Strategy<Value = ModelParams> {
    (0.05f64..0.15, 0.02f64..0.08, 0.1f64..0.4, 0.05f64..0.15, 0.5f64..2.0)
        .prop_filter("θ away from zero", |(mu, r, ..)| (mu - r).abs() > 5e-3)
        .prop_map(|(mu, r, sigma, beta, floor)| ModelParams {
            mu,
            r,
            sigma,
            beta,
            horizon: 1.0,
            floor,
        })
}

fn utility() -> impl Strategy<Value = UtilitySpec> {
    prop_oneof![
        (0.2f64..0.6).prop_map(|gamma| UtilitySpec::Power { gamma }),
        Just(UtilitySpec::NonHara),
    ]
}

/// Parameter sets on which the closed-form boundary applies.
fn admissible() -> impl Strategy<Value = Problem> {
    (market(), utility()).prop_filter_map("assumption fails", |(m, u)| {
        let p = Problem::new(m, &u).ok()?;
        p.validate_assumption().ok().map(|_| p)
    })
}

fn power_reference() -> Problem {
    RunConfig::reference_example(UtilitySpec::Power { gamma: 0.5 })
        .problem()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn closed_forms_agree_with_root_finding(p in admissible()) {
        let z0 = p.solve_z0().unwrap();
        let z_star = p.solve_z_star().unwrap();
        assert_relative_eq!(z0, p.z0_closed_form().unwrap(), epsilon = 1e-9, max_relative = 1e-9);
        assert_relative_eq!(z_star, p.z_star_closed_form().unwrap(), epsilon = 1e-9, max_relative = 1e-9);
        prop_assert!(z_star < z0);
    }

    #[test]
    fn boundary_decreases_between_its_limits(p in admissible()) {
        let b = GcaBoundary::new(&p).unwrap();
        let taus: Vec<f64> = (0..=40).map(|i| p.derived().tau_max * i as f64 / 40.0).collect();
        let zs: Vec<f64> = taus.iter().map(|&t| b.at(t)).collect();
        for w in zs.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert!(zs.iter().all(|&z| z <= b.z0 && z > b.z_star));
    }

    #[test]
    fn wealth_boundary_falls_over_time(p in admissible()) {
        let b = GcaBoundary::new(&p).unwrap();
        let xs: Vec<f64> = (0..=20).map(|i| b.wealth(i as f64 / 20.0).unwrap()).collect();
        for w in xs.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert!(xs.iter().all(|&x| x > p.params().floor));
    }

    #[test]
    fn short_time_slope_is_universal(p in admissible()) {
        let b = GcaBoundary::new(&p).unwrap();
        let tau = 1e-8;
        let ratio = (b.z0 - b.at(tau)) / (2.0 * b.a * tau.sqrt());
        prop_assert!((ratio - 1.0).abs() < 1e-3, "{ratio}");
    }

    #[test]
    fn marginal_and_wealth_are_inverse(u in utility(), floor in 0.0f64..2.0, y in 0.05f64..20.0) {
        let family = DualUtilityFamily::from_spec(&u, floor).unwrap();
        let x = family.wealth_at(y);
        assert_relative_eq!(family.marginal_at(x).unwrap(), y, max_relative = 1e-9);
    }

    #[test]
    fn dual_utility_is_strictly_convex_and_decreasing(u in utility(), floor in 0.0f64..2.0, y in 0.05f64..20.0) {
        let family = DualUtilityFamily::from_spec(&u, floor).unwrap();
        prop_assert!(family.deriv(y).unwrap() < 0.0);
        prop_assert!(family.second_deriv(y).unwrap() > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn dual_root_satisfies_first_order_condition(t in 0.0f64..1.0, x in 1.05f64..1.3) {
        let s = PrimalSolver::new(&power_reference()).unwrap();
        let y = s.solve_i(t, x).unwrap();
        let vy = s.evaluator().dual_vy(t, y).unwrap();
        assert_relative_eq!(-vy, x, max_relative = 1e-8);
    }

    #[test]
    fn dual_value_is_convex_in_the_continuation_region(t in 0.0f64..0.95, y in 1.5f64..6.0) {
        let s = PrimalSolver::new(&power_reference()).unwrap();
        prop_assume!(y > s.boundary().dual_price(t));
        prop_assert!(s.evaluator().dual_vyy(t, y).unwrap() > 0.0);
    }

    #[test]
    fn stopping_rule_matches_the_wealth_boundary(t in 0.0f64..1.0, x in 1.01f64..3.0) {
        let s = PrimalSolver::new(&power_reference()).unwrap();
        let sol = s.primal_value(t, x).unwrap();
        prop_assert_eq!(sol.stopped, x >= s.wealth_boundary(t).unwrap());
        if sol.stopped {
            prop_assert_eq!(sol.strategy, 0.0);
            assert_relative_eq!(sol.value, 2.0 * (x - 1.0).sqrt(), max_relative = 1e-12);
        } else {
            prop_assert!(sol.strategy > 0.0);
        }
    }
}
