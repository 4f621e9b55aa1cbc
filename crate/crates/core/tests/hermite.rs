mod common;

use proptest::prelude::*;

use cylflow::hermite::{self, ModeVector, MultiIndex, QuadratureRule};

fn mi(d: &[usize]) -> MultiIndex {
    MultiIndex::new(d.to_vec())
}

#[test]
fn closed_forms_up_to_degree_four() {
    for d in [0, 1, 2, 4] {
        for &x in &[-3.0, -0.7, 0.0, 1.1, 2.5] {
            let want = common::hermite(1, 0, d).eval(&[x]);
            let got = hermite::hermite_closed_form(d, x).unwrap();
            assert!((got - want).abs() < 1e-13, "deg {d} at {x}: {got} vs {want}");
        }
    }
    assert_eq!(hermite::hermite_closed_form(3, 0.3), None);
}

#[test]
fn h2_square_expansion() {
    // h2^2 = sqrt6 h4 + 2 sqrt2 h2 + 1
    let p = hermite::product_expand(&mi(&[2]), &mi(&[2]), 8).unwrap();
    assert!((p.get(&mi(&[4])) - 6f64.sqrt()).abs() < 1e-13);
    assert!((p.get(&mi(&[2])) - 2.0 * 2f64.sqrt()).abs() < 1e-13);
    assert!((p.get(&mi(&[0])) - 1.0).abs() < 1e-13);
    let rest = p.filter(|m| ![0, 2, 4].contains(&m.degree()));
    assert!(rest.max_abs() < 1e-13);
}

#[test]
fn eigenvalues_of_l() {
    for d in 0..8 {
        assert_eq!(hermite::l_eigenvalue(&MultiIndex::pure(2, 1, d)), 1.0 - d as f64 / 2.0);
    }
    let v = ModeVector::unit(mi(&[1, 2]), 8);
    assert_eq!(hermite::apply_l(&v).get(&mi(&[1, 2])), -0.5);
}

#[test]
fn basis_counts() {
    // binomial(k + d, k) modes of degree <= d
    assert_eq!(hermite::basis(1, 8).len(), 9);
    assert_eq!(hermite::basis(2, 8).len(), 45);
    assert_eq!(hermite::basis(3, 8).len(), 165);
}

#[test]
fn gram_on_default_rule() {
    for k in 1..=3 {
        let rule = QuadratureRule::new(k, hermite::DEFAULT_ORDER).unwrap();
        assert!(hermite::gram_error(k, 8, &rule) < 1e-10);
    }
}

fn index(k: usize, max: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(0..=max, k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_matches_oracle(a in index(2, 3), b in index(2, 3)) {
        let k = 2;
        let got = hermite::product_expand(&mi(&a), &mi(&b), 8).unwrap();
        let f = common::mode(&a).mul(&common::mode(&b));
        for d in common::indices(k, 6) {
            let want = f.mul(&common::mode(&d)).mean();
            prop_assert!((got.get(&mi(&d)) - want).abs() < 1e-11);
        }
    }

    #[test]
    fn eval_matches_oracle(d in index(3, 5), x in proptest::collection::vec(-3.0f64..3.0, 3)) {
        let want = common::mode(&d).eval(&x);
        let got = hermite::hermite_eval(&mi(&d), &x, 16).unwrap();
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn embedding_keeps_values(c in proptest::collection::vec(-1.0f64..1.0, 6), x in proptest::collection::vec(-2.0f64..2.0, 3)) {
        let mut v = ModeVector::zero(2, 8);
        for (m, c) in hermite::basis(2, 2).into_iter().zip(&c) {
            v.set(m, *c);
        }
        let e = v.embed(3);
        prop_assert!((e.eval(&x) - v.eval(&x[..2])).abs() < 1e-13);
        prop_assert!((e.norm() - v.norm()).abs() < 1e-15);
    }

    #[test]
    fn projection_inverts_synthesis(c in proptest::collection::vec(-1.0f64..1.0, 10)) {
        let rule = QuadratureRule::new(2, 12).unwrap();
        let mut v = ModeVector::zero(2, 3);
        for (m, c) in hermite::basis(2, 3).into_iter().zip(&c) {
            v.set(m, *c);
        }
        let p = hermite::project(|x| v.eval(x), 3, &rule).unwrap();
        prop_assert!(p.axpy(-1.0, &v).max_abs() < 1e-12);
    }
}
