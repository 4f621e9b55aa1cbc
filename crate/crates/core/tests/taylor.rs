mod common;

use std::f64::consts::SQRT_2;

use proptest::prelude::*;

use cylflow::hermite::Dimensions;
use cylflow::taylor::{self, ConstantsFile, DerivedConstants, LeadingModes};
use cylflow::SymMatrixK;

fn leading(a: f64, b: Vec<f64>, c: &[f64]) -> LeadingModes {
    let k = b.len();
    let mut m = SymMatrixK::zeros(k);
    let mut it = c.iter();
    for i in 0..k {
        for j in i..k {
            m.set(i, j, *it.next().unwrap());
        }
    }
    LeadingModes { a, b, c: m }
}

#[test]
fn pure_quadratic_k1() {
    // -1/2 (c h2)^2 = -c^2/2 (sqrt6 h4 + 2 sqrt2 h2 + 1)
    let u = leading(0.0, vec![0.0], &[0.2]);
    let q = taylor::q2_leading(&u);
    assert!((q.a + 0.02).abs() < 1e-15);
    assert!((q.c.get(0, 0) + SQRT_2 * 0.04).abs() < 1e-15);
    assert_eq!(q.b[0], 0.0);
}

#[test]
fn stored_table_is_current() {
    let stored = ConstantsFile::stored().unwrap();
    let fresh = taylor::generate_constants(cylflow::hermite::DEFAULT_ORDER).unwrap();
    assert_eq!(stored.checksum, fresh.checksum);
    assert_eq!(stored.to_toml(), taylor::STORED_CONSTANTS);
    assert_eq!(taylor::constants_checksum().len(), 64);
}

#[test]
fn named_constants() {
    for m in taylor::TABLE_SPHERE_DIMS {
        let d = DerivedConstants::derive(&Dimensions::new(m + 1, 1).unwrap()).unwrap();
        let mf = m as f64;
        assert!((d.c1 - (6.0 - 2.0 * mf)).abs() < 1e-10);
        assert!((d.c2 + 6f64.sqrt()).abs() < 1e-10);
        assert!((d.cstar - (8.0 - 2.0 * mf)).abs() < 1e-10);
        assert!((d.cstar - d.cstar_from_formula()).abs() < 1e-10);
        // independent of k at fixed sphere dimension
        let d2 = DerivedConstants::derive(&Dimensions::new(m + 2, 2).unwrap()).unwrap();
        assert!((d2.cstar - d.cstar).abs() < 1e-10);
    }
}

#[test]
fn threshold_formula() {
    assert_eq!(taylor::threshold_c(0.0), 0.05);
    assert!((taylor::threshold_c(6.0) - 1.0 / 70.0).abs() < 1e-16);
    assert!((taylor::threshold_c(-2.0) - 1.0 / 30.0).abs() < 1e-16);
}

#[test]
fn q3_formula_rejects_bad_input() {
    let consts = DerivedConstants::derive(&Dimensions::new(3, 2).unwrap()).unwrap();
    let mut off = SymMatrixK::zeros(2);
    off.set(0, 1, 0.1);
    let z = SymMatrixK::zeros(2);
    assert!(taylor::q3_v0_project(0.0, &off, &z, &[0.0, 0.0], &consts).is_err());
    assert!(taylor::q3_v0_project(0.0, &z, &SymMatrixK::identity(2).scale(0.1), &[0.0, 0.0], &consts).is_err());
    assert!(taylor::q3_v0_project(1.5, &z, &z, &[0.0, 0.0], &consts).is_err());
}

fn entries(k: usize) -> impl Strategy<Value = (f64, Vec<f64>, Vec<f64>)> {
    (
        -0.3f64..0.3,
        proptest::collection::vec(-0.3f64..0.3, k),
        proptest::collection::vec(-0.3f64..0.3, k * (k + 1) / 2),
    )
}

fn oracle_q2(u: &LeadingModes) -> Vec<f64> {
    let k = u.k();
    let p = common::leading(u.a, &u.b, &u.c.to_rows());
    let q = p.mul(&p).scale(-0.5);
    let mut out = vec![q.mean()];
    for i in 0..k {
        out.push(q.mul(&common::hermite(k, i, 1)).mean());
    }
    for i in 0..k {
        for j in i..k {
            out.push(if i == j {
                q.mul(&common::hermite(k, i, 2)).mean()
            } else {
                q.mul(&common::hermite(k, i, 1)).mul(&common::hermite(k, j, 1)).mean() / SQRT_2
            });
        }
    }
    out
}

fn flat(u: &LeadingModes) -> Vec<f64> {
    let k = u.k();
    let mut out = vec![u.a];
    out.extend(&u.b);
    for i in 0..k {
        for j in i..k {
            out.push(u.c.get(i, j));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn q2_matches_oracle_k2((a, b, c) in entries(2)) {
        let u = leading(a, b, &c);
        let got = flat(&taylor::q2_leading(&u));
        for (g, w) in got.iter().zip(oracle_q2(&u)) {
            prop_assert!((g - w).abs() < 1e-14);
        }
    }

    #[test]
    fn q2_matches_oracle_k3((a, b, c) in entries(3)) {
        let u = leading(a, b, &c);
        let got = flat(&taylor::q2_leading(&u));
        for (g, w) in got.iter().zip(oracle_q2(&u)) {
            prop_assert!((g - w).abs() < 1e-14);
        }
    }

    #[test]
    fn q2_is_homogeneous((a, b, c) in entries(2), s in -3.0f64..3.0) {
        let u = leading(a, b.clone(), &c);
        let us = leading(s * a, b.iter().map(|x| s * x).collect(), &c.iter().map(|x| s * x).collect::<Vec<_>>());
        let q = flat(&taylor::q2_leading(&u));
        let qs = flat(&taylor::q2_leading(&us));
        for (x, y) in q.iter().zip(qs) {
            prop_assert!((s * s * x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn bar_q_is_orthogonally_equivariant(d in proptest::collection::vec(-0.2f64..0.0, 2), theta in 0.0f64..6.3) {
        let (s, c) = theta.sin_cos();
        let rot = nalgebra::DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let u = SymMatrixK::from_diagonal(&d);
        let lhs = taylor::bar_q(&u.conjugate(&rot), 2.0);
        let rhs = taylor::bar_q(&u, 2.0).conjugate(&rot);
        prop_assert!(lhs.sub(&rhs).frobenius() < 1e-14);
    }
}
