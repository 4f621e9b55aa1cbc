use proptest::prelude::*;

use cylflow::hermite::{self, Dimensions, MultiIndex};
use cylflow::pde::{Grid, RadialGraphState};
use cylflow::tracker::{self, Phase, RadiusPolicy, Tracker, TrackerConfig};

fn state(k: usize, h: f64, r_dom: f64, f: impl Fn(&[f64]) -> f64) -> RadialGraphState {
    RadialGraphState::from_fn(Dimensions::new(k + 2, k).unwrap(), Grid::new(k, h, r_dom), 0.0, f)
}

fn fixed(r: f64) -> TrackerConfig {
    TrackerConfig {
        radius: RadiusPolicy::Fixed { r },
        ..Default::default()
    }
}

#[test]
fn radius_examples() {
    assert!((tracker::radius_ancient((-3f64).exp(), 3) - 3.0).abs() < 1e-12);
    assert_eq!(tracker::radius_ancient(0.0, 3), f64::INFINITY);
    assert!((tracker::radius_quadratic(0.0, 0.0, 2) - 2.0 * 10f64.ln().sqrt()).abs() < 1e-14);
}

#[test]
fn cutoff_profile() {
    assert_eq!(tracker::cutoff(&[3.0, 4.0], 5.3), 1.0);
    assert_eq!(tracker::cutoff(&[3.0, 4.0], 5.1), 0.0);
    assert!((tracker::omega(-0.15) - 0.5).abs() < 1e-15);
}

#[test]
fn pure_modes_are_recovered() {
    // the cutoff tail is of size exp(-R^2 / 4) times polynomial growth
    let cfg = fixed(12.0);
    for d in 0..=4 {
        let s = state(1, 0.05, 14.0, |x| 0.01 * hermite::hermite_1d(d, x[0]));
        let up = tracker::u_plus(&s, 12.0, &cfg).unwrap();
        let got = up.get(&MultiIndex::new(vec![d]));
        assert!((got - 0.01).abs() < 1e-7, "degree {d}: {got}");
        assert!(up.axpy(-1.0, &hermite::ModeVector::unit(MultiIndex::new(vec![d]), 8).scaled(0.01)).max_abs() < 1e-7);
    }
}

#[test]
fn below_threshold_part_is_the_remainder() {
    // lambda = -3/2 keeps degrees <= 4; the degree-5 coefficient is all of U-
    let cfg = fixed(12.0);
    let s = state(1, 0.05, 14.0, |x| 0.02 * hermite::hermite_1d(1, x[0]) + 0.003 * hermite::hermite_1d(5, x[0]));
    let um = tracker::u_minus(&s, 12.0, &cfg).unwrap() - cfg.floor(12.0);
    assert!((um - 0.003).abs() < 1e-6, "{um}");
    let up = tracker::u_plus(&s, 12.0, &cfg).unwrap();
    assert!((up.norm() - 0.02).abs() < 1e-6);
}

#[test]
fn two_dimensional_projection() {
    let cfg = fixed(10.0);
    let s = state(2, 0.1, 11.0, |x| 0.01 * hermite::hermite_1d(1, x[0]) * hermite::hermite_1d(1, x[1]));
    let up = tracker::u_plus(&s, 10.0, &cfg).unwrap();
    assert!((up.get(&MultiIndex::pair(2, 0, 1)) - 0.01).abs() < 1e-5);
    assert!(up.axpy(-0.01, &hermite::ModeVector::unit(MultiIndex::pair(2, 0, 1), 8)).max_abs() < 1e-5);
}

#[test]
fn tracker_phases_on_constant_mode() {
    let dims = Dimensions::new(3, 1).unwrap();
    let mut t = Tracker::new(dims, fixed(8.0)).unwrap();
    for i in 0..5 {
        let tau = 0.1 * i as f64;
        let mut s = state(1, 0.05, 10.0, |_| 0.001 * tau.exp());
        s.tau = tau;
        t.observe(&s).unwrap();
    }
    let rep = t.finalize().unwrap();
    assert_eq!(rep.single_phase(), Some(Phase::Constant));
    assert!(t.records[1..4].iter().all(|r| r.residual_plus.is_some()));
}

#[test]
fn config_validation() {
    assert!(TrackerConfig::default().validate().is_ok());
    for bad in [
        TrackerConfig { lambda: -1.2, ..Default::default() },
        TrackerConfig { lambda: 0.5, ..Default::default() },
        TrackerConfig { eta: 0.5, ..Default::default() },
        TrackerConfig { eps: 1.0, ..Default::default() },
        TrackerConfig { lambda: -4.5, ..Default::default() },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
    let c = TrackerConfig::default();
    assert_eq!(c.top_degree(), 4);
    assert!((c.floor(4.0) - 0.1 * (-(0.9f64 * 4.0).powi(2) / 8.0).exp()).abs() < 1e-16);
    assert_eq!(TrackerConfig { radius: RadiusPolicy::Fixed { r: f64::INFINITY }, ..c }.floor(f64::INFINITY), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_is_linear(a in -0.05f64..0.05, b in -0.05f64..0.05, s in -3.0f64..3.0) {
        let cfg = fixed(6.0);
        let f = |x: &[f64]| a * x[0] + b * (-x[0] * x[0] / 6.0).exp();
        let s1 = state(1, 0.1, 8.0, f);
        let s2 = state(1, 0.1, 8.0, |x| s * f(x));
        let u1 = tracker::u_plus(&s1, 6.0, &cfg).unwrap();
        let u2 = tracker::u_plus(&s2, 6.0, &cfg).unwrap();
        prop_assert!(u2.axpy(-s, &u1).max_abs() < 1e-15);
    }

    #[test]
    fn norms_are_nonnegative_and_split(c in proptest::collection::vec(-0.02f64..0.02, 7)) {
        let cfg = fixed(12.0);
        let s = state(1, 0.05, 14.0, |x| c.iter().enumerate().map(|(d, v)| v * hermite::hermite_1d(d, x[0])).sum());
        let up = tracker::u_plus(&s, 12.0, &cfg).unwrap();
        let um = tracker::u_minus(&s, 12.0, &cfg).unwrap() - cfg.floor(12.0);
        let above: f64 = c[..5].iter().map(|v| v * v).sum();
        let below: f64 = c[5..].iter().map(|v| v * v).sum();
        prop_assert!(um >= 0.0);
        prop_assert!((up.norm_sq() - above).abs() < 1e-8);
        prop_assert!((um * um - below).abs() < 1e-8);
    }
}
