use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use proptest::prelude::*;

use cylflow::linear_mode::{self, LeadingTrajectory, LinearAsymptotics};
use cylflow::taylor::LeadingModes;

#[test]
fn ansatz_solves_the_leading_system_at_leading_order() {
    // exact in the a and b channels up to e^{2 tau} terms
    let (a, b) = (0.1, vec![0.3, -0.2]);
    let asym = LinearAsymptotics::new(a, b.clone());
    let bsq: f64 = b.iter().map(|x| x * x).sum();
    for tau in [-30.0f64, -20.0, -12.0] {
        let da = (a - 0.5 * bsq * tau - 0.5 * bsq) * tau.exp();
        let rhs = linear_mode::leading_ode_rhs(&asym.ansatz(tau));
        let rem = (2.0 * tau).exp() * (1.0 + tau * tau);
        assert!((da - rhs.a).abs() < rem, "tau = {tau}");
        for (i, bi) in b.iter().enumerate() {
            assert!((0.5 * bi * (tau / 2.0).exp() - rhs.b[i]).abs() < (1.5 * tau).exp() * (1.0 + tau.abs()));
        }
    }
}

#[test]
fn zero_trajectory_has_zero_parameters() {
    let taus: Vec<f64> = (0..20).map(|i| -10.0 + 0.5 * i as f64).collect();
    let traj = LeadingTrajectory::from_fn(&taus, |_| LeadingModes::zero(2));
    let r = linear_mode::extract_asymptotics(&traj, (-10.0, 0.0)).unwrap();
    assert_eq!(r.a_bar, 0.0);
    assert_eq!(r.b_bar, vec![0.0, 0.0]);
}

#[test]
fn quadratic_dominated_input_is_rejected() {
    let taus: Vec<f64> = (0..20).map(|i| -10.0 + 0.5 * i as f64).collect();
    let traj = LeadingTrajectory::from_fn(&taus, |t| {
        let mut u = LeadingModes::zero(1);
        u.c.set(0, 0, -1.0 / (SQRT_2 * (1.0 - t)));
        u
    });
    assert!(linear_mode::extract_asymptotics(&traj, (-10.0, 0.0)).is_err());
    assert!(linear_mode::extract_asymptotics(&traj, (5.0, 6.0)).is_err());
}

#[test]
fn report_json_has_fields() {
    let asym = LinearAsymptotics::new(0.2, vec![0.1]);
    let taus: Vec<f64> = (0..50).map(|i| -20.0 + 0.2 * i as f64).collect();
    let traj = LeadingTrajectory::from_fn(&taus, |t| asym.ansatz(t));
    let r = linear_mode::extract_asymptotics(&traj, (-20.0, -10.0)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert!(v.get("a_bar").is_some() && v.get("b_bar").is_some() && v.get("residual").is_some());
    assert!(r.residual < 1e-12);
}

#[test]
fn bowl_constant_is_exact() {
    assert_eq!(linear_mode::bowl_constant(), FRAC_1_SQRT_2);
    assert!(linear_mode::bowl_fixed_point(FRAC_1_SQRT_2, -0.3, 2.5, 3).unwrap());
    assert!(!linear_mode::bowl_fixed_point(0.5, -0.3, 2.5, 3).unwrap());
}

#[test]
fn transform_rejects_bad_arguments() {
    let asym = LinearAsymptotics::new(0.2, vec![0.1, 0.0]);
    assert!(linear_mode::transform_asymptotics(&asym, 0.0, &[0.0, 0.0], 0.0).is_err());
    assert!(linear_mode::transform_asymptotics(&asym, 1.0, &[0.0], 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn closed_form_round_trip(a in -0.5f64..0.5, b in proptest::collection::vec(-0.5f64..0.5, 1..=3)) {
        let asym = LinearAsymptotics::new(a, b.clone());
        let taus: Vec<f64> = (0..=100).map(|i| -25.0 + 0.1 * i as f64).collect();
        let traj = LeadingTrajectory::from_fn(&taus, |t| asym.ansatz(t));
        let r = linear_mode::extract_asymptotics(&traj, (-25.0, -15.0)).unwrap();
        prop_assert!((r.a_bar - a).abs() < 1e-9);
        for (x, y) in r.b_bar.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_is_a_time_shift(a in -1.0f64..1.0, b in proptest::collection::vec(-1.0f64..1.0, 1..=3), alpha in 0.2f64..5.0, tau in -5.0f64..0.0) {
        let asym = LinearAsymptotics::new(a, b.clone());
        let k = b.len();
        let t = linear_mode::transform_asymptotics(&asym, alpha, &vec![0.0; k], 0.0).unwrap();
        let lhs = t.ansatz(tau);
        let rhs = asym.ansatz(tau + 2.0 * alpha.ln());
        prop_assert!(linear_mode::leading_distance(&lhs, &rhs) <= 1e-12 * rhs.norm().max(1.0));
    }

    #[test]
    fn transforms_compose(a in -1.0f64..1.0, b in proptest::collection::vec(-1.0f64..1.0, 2), s1 in 0.5f64..2.0, s2 in 0.5f64..2.0) {
        // successive scalings multiply
        let asym = LinearAsymptotics::new(a, b);
        let z = [0.0, 0.0];
        let two = linear_mode::transform_asymptotics(&linear_mode::transform_asymptotics(&asym, s1, &z, 0.0).unwrap(), s2, &z, 0.0).unwrap();
        let one = linear_mode::transform_asymptotics(&asym, s1 * s2, &z, 0.0).unwrap();
        prop_assert!((two.a_bar - one.a_bar).abs() < 1e-12 * one.a_bar.abs().max(1.0));
        for (x, y) in two.b_bar.iter().zip(&one.b_bar) {
            prop_assert!((x - y).abs() < 1e-14);
        }
    }
}
