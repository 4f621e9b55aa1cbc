//! Quadratic and cubic Taylor parts of the graph-equation nonlinearity and
//! their projections onto the leading Hermite modes.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hermite::{
    self, basis, Dimensions, FieldJet, ModeVector, MultiIndex, QuadratureRule, DEFAULT_ORDER,
};
use crate::symmetric::SymMatrixK;

/// Constant, linear and quadratic mode coefficients:
/// `U = a p0 + sum_i b_i p1_i + sum_{i,j} c_ij p2_ij`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeadingModes {
    pub a: f64,
    pub b: Vec<f64>,
    pub c: SymMatrixK,
}

impl LeadingModes {
    pub fn zero(k: usize) -> Self {
        LeadingModes {
            a: 0.0,
            b: vec![0.0; k],
            c: SymMatrixK::zeros(k),
        }
    }

    pub fn k(&self) -> usize {
        self.b.len()
    }

    /// Coefficients in the orthonormal basis. The off-diagonal `p2_ij` has norm
    /// `1/sqrt 2`, so the pair `c_ij + c_ji` becomes `sqrt 2 c_ij` on the mode `e_i + e_j`.
    pub fn to_modes(&self, cap: usize) -> ModeVector {
        let k = self.k();
        let mut v = ModeVector::zero(k, cap.max(2));
        v.set(MultiIndex::zero(k), self.a);
        for i in 0..k {
            v.set(MultiIndex::unit(k, i), self.b[i]);
            v.set(MultiIndex::pair(k, i, i), self.c.get(i, i));
            for j in i + 1..k {
                v.set(MultiIndex::pair(k, i, j), SQRT_2 * self.c.get(i, j));
            }
        }
        v
    }

    pub fn from_modes(v: &ModeVector) -> Self {
        let k = v.k();
        let mut c = SymMatrixK::zeros(k);
        let b = (0..k).map(|i| v.get(&MultiIndex::unit(k, i))).collect();
        for i in 0..k {
            c.set(i, i, v.get(&MultiIndex::pair(k, i, i)));
            for j in i + 1..k {
                c.set(i, j, v.get(&MultiIndex::pair(k, i, j)) * FRAC_1_SQRT_2);
            }
        }
        LeadingModes {
            a: v.get(&MultiIndex::zero(k)),
            b,
            c,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.a * self.a + self.b.iter().map(|x| x * x).sum::<f64>() + self.c.frobenius().powi(2))
            .sqrt()
    }

    /// Jet of the field `a + sum b_i x_i/sqrt2 + sum c_ij (x_i x_j - 2 delta_ij)/(2 sqrt2)`.
    pub fn jet(&self, x: &[f64]) -> FieldJet {
        let k = self.k();
        let s = 2.0 * SQRT_2;
        let mut j = FieldJet::zero(k);
        j.value = self.a;
        for i in 0..k {
            j.value += self.b[i] * x[i] / SQRT_2;
            j.grad[i] += self.b[i] / SQRT_2;
            for l in 0..k {
                let cil = self.c.get(i, l);
                let delta = if i == l { 2.0 } else { 0.0 };
                j.value += cil * (x[i] * x[l] - delta) / s;
                j.grad[i] += 2.0 * cil * x[l] / s;
                j.hess[i * k + l] = 2.0 * cil / s;
            }
        }
        j
    }
}

/// Pointwise `-u^2 / 2`.
pub fn q2_pointwise(u: f64) -> f64 {
    -0.5 * u * u
}

pub fn q2_field<F: Fn(&[f64]) -> f64>(u: F) -> impl Fn(&[f64]) -> f64 {
    move |x| q2_pointwise(u(x))
}

/// Pointwise `-u^2/2 + u^3/2 - 2(n-k) grad^2 u(grad u, grad u)`.
pub fn q3_pointwise(dims: &Dimensions, j: &FieldJet) -> f64 {
    let u = j.value;
    -0.5 * u * u + 0.5 * u * u * u - dims.radius_sq() * j.hess_grad_grad()
}

pub fn q3_field<'a>(dims: &'a Dimensions, u: &'a ModeVector) -> impl Fn(&[f64]) -> f64 + 'a {
    move |x| q3_pointwise(dims, &u.eval_jet(x))
}

/// Closed-form projection of `Q2(U)` onto the constant, linear and quadratic modes.
pub fn q2_leading(u: &LeadingModes) -> LeadingModes {
    let k = u.k();
    let (a, b, c) = (u.a, &u.b, &u.c);
    let bsq: f64 = b.iter().map(|x| x * x).sum();
    let csq: f64 = c.matrix().iter().map(|x| x * x).sum();
    let abar = -0.5 * a * a - 0.5 * bsq - 0.5 * csq;
    let bbar = (0..k)
        .map(|i| -a * b[i] - SQRT_2 * (0..k).map(|l| c.get(i, l) * b[l]).sum::<f64>())
        .collect();
    let mut cbar = SymMatrixK::zeros(k);
    for i in 0..k {
        for j in i..k {
            let cc: f64 = (0..k).map(|l| c.get(i, l) * c.get(l, j)).sum();
            cbar.set(i, j, -SQRT_2 * cc - FRAC_1_SQRT_2 * b[i] * b[j] - a * c.get(i, j));
        }
    }
    LeadingModes {
        a: abar,
        b: bbar,
        c: cbar,
    }
}

/// Projections of `Q2(U)` for a diagonal quadratic `U = sum_i c_ii p2_ii`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagQ2Projections {
    /// Coefficient on the constant mode.
    pub v1: f64,
    /// Projections onto the degree-one and degree-three modes (identically zero).
    pub v_half: ModeVector,
    pub v_minus_half: ModeVector,
    /// `cross[i][j]` (i != j): coefficient on `p2_ii p2_jj`, counted once per ordered pair.
    pub cross: Vec<Vec<f64>>,
    /// Coefficient of the pure degree-four mode in each coordinate.
    pub pure: Vec<f64>,
}

impl DiagQ2Projections {
    /// The degree-four part as a mode vector (both orders of each pair summed).
    pub fn v_minus1_modes(&self, cap: usize) -> ModeVector {
        let k = self.pure.len();
        let mut v = ModeVector::zero(k, cap.max(4));
        for i in 0..k {
            v.set(MultiIndex::pure(k, i, 4), self.pure[i]);
            for j in 0..k {
                if i != j {
                    let mut d = vec![0; k];
                    d[i] = 2;
                    d[j] = 2;
                    v.add_to(MultiIndex::new(d), self.cross[i][j]);
                }
            }
        }
        v
    }
}

pub fn q2_diag_projections(c: &SymMatrixK) -> Result<DiagQ2Projections> {
    if !c.is_diagonal() {
        return Err(Error::Taylor("q2_diag_projections needs a diagonal quadratic part".into()));
    }
    let k = c.k();
    let d = c.diagonal();
    let v1 = -0.5 * d.iter().map(|x| x * x).sum::<f64>();
    let mut cross = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                cross[i][j] = -0.5 * d[i] * d[j];
            }
        }
    }
    let pure = d.iter().map(|x| -0.5 * 6f64.sqrt() * x * x).collect();
    Ok(DiagQ2Projections {
        v1,
        v_half: ModeVector::zero(k, 1),
        v_minus_half: ModeVector::zero(k, 3),
        cross,
        pure,
    })
}

/// The dimensional constants of the cubic projection and of the matrix ODE.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub sphere_dim: usize,
    pub order: usize,
    /// Cubic self-interaction: the `c^3` coefficient of `<Q3(c p2_11), p2_11>` minus `3/2`.
    pub c1: f64,
    /// Coupling of `c_ii w_i`, equal to `-<p2_11 p4, p2_11>`.
    pub c2: f64,
    /// Pure-cubic coefficient of `<Q3(Q'(U')), p2_11>` after removing the trace term.
    pub cstar: f64,
}

impl DerivedConstants {
    pub fn derive(dims: &Dimensions) -> Result<Self> {
        derive_constants_with(dims, DEFAULT_ORDER)
    }

    /// `C1 - 1 - (sqrt6/2) C2`, the value `C*` must take if the projection
    /// formula and the correction map are consistent.
    pub fn cstar_from_formula(&self) -> f64 {
        self.c1 - 1.0 - 0.5 * 6f64.sqrt() * self.c2
    }

    /// Threshold `c` of the invariant map.
    pub fn threshold(&self) -> f64 {
        threshold_c(self.cstar)
    }
}

pub fn threshold_c(cstar: f64) -> f64 {
    0.05f64.min(1.0 / (10.0 * (1.0 + cstar.abs())))
}

/// Polynomial part of the projection of `Q3(U)` onto `p2_ii`, for
/// `U = a + sum c_ii p2_ii + sum_{i != j} v_ij p2_ii p2_jj + sum w_i p4_i`.
pub fn q3_v0_project(
    a: f64,
    c: &SymMatrixK,
    v: &SymMatrixK,
    w: &[f64],
    consts: &DerivedConstants,
) -> Result<Vec<f64>> {
    if !c.is_diagonal() {
        return Err(Error::Taylor("q3_v0_project needs a diagonal quadratic part".into()));
    }
    let k = c.k();
    if v.k() != k || w.len() != k {
        return Err(Error::Taylor("q3_v0_project arguments have inconsistent k".into()));
    }
    if (0..k).any(|i| v.get(i, i) != 0.0) {
        return Err(Error::Taylor("off-diagonal coefficients must have a zero diagonal".into()));
    }
    let d = c.diagonal();
    let bound = [a.abs(), c.matrix().amax(), v.matrix().amax()]
        .into_iter()
        .chain(w.iter().map(|x| x.abs()))
        .fold(0.0, f64::max);
    if bound >= 1.0 {
        return Err(Error::Taylor(format!(
            "q3_v0_project needs all amplitudes below 1, got {bound}"
        )));
    }
    let sq: f64 = d.iter().map(|x| x * x).sum();
    Ok((0..k)
        .map(|i| {
            let ci = d[i];
            let vs: f64 = (0..k).map(|j| d[j] * v.get(j, i)).sum();
            -SQRT_2 * ci * ci - a * ci + 1.5 * sq * ci + consts.c1 * ci.powi(3) - 2.0 * vs
                + consts.c2 * ci * w[i]
        })
        .collect())
}

/// `-sqrt2 U^2 + 2 tr(U^2) U + C* U^3`.
pub fn bar_q(u: &SymMatrixK, cstar: f64) -> SymMatrixK {
    let u2 = u.square();
    let u3 = SymMatrixK::symmetrize(u2.mul(u));
    u2.scale(-SQRT_2)
        .add(&u.scale(2.0 * u2.trace()))
        .add(&u3.scale(cstar))
}

/// Scalar form of [`bar_q`] on one eigenvalue, with `trsq = sum_j lambda_j^2`.
pub fn bar_q_scalar(lambda: f64, trsq: f64, cstar: f64) -> f64 {
    -SQRT_2 * lambda * lambda + 2.0 * trsq * lambda + cstar * lambda.powi(3)
}

/// Coefficients in `eps` of `Q3(sum_{p >= 1} eps^p V_p)` at one point.
fn q3_eps_poly(dims: &Dimensions, parts: &[FieldJet]) -> Vec<f64> {
    let k = parts[0].k();
    let deg = parts.len();
    let lift = |f: &dyn Fn(&FieldJet) -> f64| {
        let mut p = vec![0.0; deg + 1];
        for (i, j) in parts.iter().enumerate() {
            p[i + 1] = f(j);
        }
        p
    };
    let val = lift(&|j| j.value);
    let grads: Vec<Vec<f64>> = (0..k).map(|a| lift(&|j| j.grad[a])).collect();
    let hess: Vec<Vec<f64>> = (0..k * k).map(|a| lift(&|j| j.hess[a])).collect();
    let top = 3 * deg + 1;
    let mut out = vec![0.0; top];
    let v2 = poly_mul(&val, &val);
    let v3 = poly_mul(&v2, &val);
    for (i, c) in v2.iter().enumerate() {
        out[i] -= 0.5 * c;
    }
    for (i, c) in v3.iter().enumerate() {
        out[i] += 0.5 * c;
    }
    for a in 0..k {
        for b in 0..k {
            let t = poly_mul(&poly_mul(&hess[a * k + b], &grads[a]), &grads[b]);
            for (i, c) in t.iter().enumerate() {
                out[i] -= dims.radius_sq() * c;
            }
        }
    }
    out
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            r[i + j] += a * b;
        }
    }
    r
}

/// Correction map `Q'`: the diagonal quadratic `U'` plus the modes slaved to it
/// by `Q2` (constant part `+|c|^2/2`, degree-four parts of the diagonal `Q2` projection).
pub fn correction_map(c: &[f64], cap: usize) -> ModeVector {
    let k = c.len();
    let u = SymMatrixK::from_diagonal(c);
    let proj = q2_diag_projections(&u).expect("diagonal by construction");
    let mut v = LeadingModes {
        a: -proj.v1,
        b: vec![0.0; k],
        c: u,
    }
    .to_modes(cap.max(4));
    v = v.axpy(1.0, &proj.v_minus1_modes(cap.max(4)));
    v
}

/// `eps`-polynomial coefficients of `<Q3(V(eps)), p2_ii>` for `i = 0..k`, where
/// `V(eps) = sum_p eps^p V_p`, on the rule.
fn project_eps_poly(dims: &Dimensions, parts: &[ModeVector], rule: &QuadratureRule) -> Result<Vec<Vec<f64>>> {
    let k = dims.k();
    let top = 3 * parts.len() + 1;
    let mut acc = vec![vec![0.0; top]; k];
    for (x, w) in rule.iter() {
        let jets: Vec<FieldJet> = parts.iter().map(|p| p.eval_jet(x)).collect();
        let poly = q3_eps_poly(dims, &jets);
        for (i, row) in acc.iter_mut().enumerate() {
            let h = hermite::hermite_1d(2, x[i]) * w;
            for (r, p) in row.iter_mut().zip(&poly) {
                *r += h * p;
            }
        }
    }
    if acc.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Taylor("non-finite projection".into()));
    }
    Ok(acc)
}

/// Cubic and quadratic `eps` coefficients of `<Q3(Q'(eps diag(c))), p2_ii>`.
pub fn q3_of_correction_coeffs(dims: &Dimensions, c: &[f64], order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = dims.k();
    let rule = QuadratureRule::new(k, order)?;
    let full = correction_map(c, 4);
    let lin = full.degree_part(2);
    let quad = full.filter(|m| m.degree() != 2);
    let poly = project_eps_poly(dims, &[lin, quad], &rule)?;
    Ok((poly.iter().map(|p| p[2]).collect(), poly.iter().map(|p| p[3]).collect()))
}

pub fn derive_constants_with(dims: &Dimensions, order: usize) -> Result<DerivedConstants> {
    let k = dims.k();
    let rule = QuadratureRule::new(k, order)?;
    let p11 = ModeVector::unit(MultiIndex::pair(k, 0, 0), 4);

    let cubic = project_eps_poly(dims, std::slice::from_ref(&p11), &rule)?[0][3];
    let c1 = cubic - 1.5;

    let rule1 = QuadratureRule::new(1, order)?;
    let h24 = hermite::inner(
        |x| hermite::hermite_1d(2, x[0]) * hermite::hermite_1d(4, x[0]),
        |x| hermite::hermite_1d(2, x[0]),
        &rule1,
    )?;
    let c2 = -h24;

    let mut dir = vec![0.0; k];
    dir[0] = 1.0;
    let (_, cub) = q3_of_correction_coeffs(dims, &dir, order)?;
    // remove 2 tr(U^2) U, which contributes 2 c^3 for a single direction
    let cstar = cub[0] - 2.0;

    Ok(DerivedConstants {
        sphere_dim: dims.sphere_dim(),
        order,
        c1,
        c2,
        cstar,
    })
}

/// `P_{> lambda} Q_J(U)` for `J <= 3`; returns the projection and whether `J` was truncated.
pub fn q_taylor_plus(
    dims: &Dimensions,
    u: &ModeVector,
    j: usize,
    lambda: f64,
    rule: &QuadratureRule,
) -> Result<(ModeVector, bool)> {
    let truncated = j > 3;
    let k = dims.k();
    let cap = u.cap();
    let top = basis(k, cap)
        .into_iter()
        .filter(|m| hermite::l_eigenvalue(m) > lambda)
        .map(|m| m.degree())
        .max()
        .unwrap_or(0);
    let out = match j {
        0 | 1 => ModeVector::zero(k, cap),
        2 => hermite::project(|x| q2_pointwise(u.eval(x)), top, rule)?,
        _ => hermite::project(|x| q3_pointwise(dims, &u.eval_jet(x)), top, rule)?,
    };
    Ok((out.above(lambda).with_cap(cap), truncated))
}

/// One row of the generated constants table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantEntry {
    pub name: String,
    pub sphere_dim: usize,
    pub value: f64,
    pub quadrature_order: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsFile {
    pub generator: String,
    pub checksum: String,
    pub constant: Vec<ConstantEntry>,
}

pub const STORED_CONSTANTS: &str = include_str!("../data/constants.toml");
pub const TABLE_SPHERE_DIMS: [usize; 3] = [1, 2, 3];

fn entries_checksum(entries: &[ConstantEntry]) -> String {
    let mut h = Sha256::new();
    for e in entries {
        h.update(format!("{}|{}|{:.16e}|{}\n", e.name, e.sphere_dim, e.value, e.quadrature_order));
    }
    hex(&h.finalize())
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Regenerates the constants table for sphere dimensions 1 to 3.
pub fn generate_constants(order: usize) -> Result<ConstantsFile> {
    let mut constant = Vec::new();
    for m in TABLE_SPHERE_DIMS {
        let dims = Dimensions::new(m + 1, 1)?;
        let c = derive_constants_with(&dims, order)?;
        for (name, value) in [("C1", c.c1), ("C2", c.c2), ("Cstar", c.cstar)] {
            constant.push(ConstantEntry {
                name: name.into(),
                sphere_dim: m,
                value,
                quadrature_order: order,
            });
        }
    }
    Ok(ConstantsFile {
        generator: format!("cylflow {}", env!("CARGO_PKG_VERSION")),
        checksum: entries_checksum(&constant),
        constant,
    })
}

impl ConstantsFile {
    pub fn to_toml(&self) -> String {
        let mut s = String::from("# Generated by `cylflow constants`. Do not edit by hand.\n");
        s.push_str(&format!("generator = \"{}\"\n", self.generator));
        s.push_str(&format!("checksum = \"{}\"\n", self.checksum));
        for e in &self.constant {
            s.push_str(&format!(
                "\n[[constant]]\nname = \"{}\"\nsphere_dim = {}\nvalue = {:.16e}\nquadrature_order = {}\n",
                e.name, e.sphere_dim, e.value, e.quadrature_order
            ));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f: ConstantsFile =
            toml::from_str(text).map_err(|e| Error::Taylor(format!("constants file: {e}")))?;
        if entries_checksum(&f.constant) != f.checksum {
            return Err(Error::Taylor("constants file checksum mismatch".into()));
        }
        Ok(f)
    }

    pub fn stored() -> Result<Self> {
        Self::parse(STORED_CONSTANTS)
    }

    pub fn lookup(&self, name: &str, sphere_dim: usize) -> Option<f64> {
        self.constant
            .iter()
            .find(|e| e.name == name && e.sphere_dim == sphere_dim)
            .map(|e| e.value)
    }
}

/// SHA-256 of the stored constants file, recorded in run manifests.
pub fn constants_checksum() -> String {
    hex(&Sha256::digest(STORED_CONSTANTS.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leading_modes_round_trip() {
        let u = LeadingModes {
            a: 0.1,
            b: vec![0.2, -0.3],
            c: SymMatrixK::from_rows(&[vec![0.4, -0.05], vec![-0.05, 0.25]]).unwrap(),
        };
        let back = LeadingModes::from_modes(&u.to_modes(8));
        assert!((back.c.get(0, 1) - u.c.get(0, 1)).abs() < 1e-16);
        assert!((u.to_modes(8).norm() - u.norm()).abs() < 1e-15);
        let x = [0.3, -1.7];
        assert!((u.to_modes(8).eval(&x) - u.jet(&x).value).abs() < 1e-14);
    }

    #[test]
    fn q2_leading_examples() {
        let r = q2_leading(&LeadingModes {
            a: 1.0,
            ..LeadingModes::zero(2)
        });
        assert_eq!(r.a, -0.5);
        let r = q2_leading(&LeadingModes {
            a: 0.0,
            b: vec![1.0, 0.0],
            c: SymMatrixK::zeros(2),
        });
        assert_eq!(r.a, -0.5);
        assert!((r.c.get(0, 0) + FRAC_1_SQRT_2).abs() < 1e-16);
        assert_eq!(r.c.get(1, 1), 0.0);
        let r = q2_leading(&LeadingModes {
            a: 0.0,
            b: vec![0.0; 3],
            c: SymMatrixK::identity(3),
        });
        assert_eq!(r.a, -1.5);
        assert!((r.c.get(2, 2) + SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn bar_q_diagonal_scalar_law() {
        let u = SymMatrixK::from_diagonal(&[-0.2, -0.05]);
        let q = bar_q(&u, 6.0);
        let tr = 0.04 + 0.0025;
        assert!((q.get(0, 0) - bar_q_scalar(-0.2, tr, 6.0)).abs() < 1e-16);
        assert_eq!(q.get(0, 1), 0.0);
    }
}
