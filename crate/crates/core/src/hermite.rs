//! Gaussian-weighted Hermite basis on R^k.
//!
//! The weight is the probability density `(4 pi)^{-k/2} exp(-|x|^2 / 4)`. In
//! one variable the orthonormal polynomials are `h_n(x) = He_n(x / sqrt 2) /
//! sqrt(n!)`, and a mode on R^k is a product of one such factor per coordinate.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::num::NonZeroUsize;

use gauss_quad::GaussHermite;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CAP: usize = 8;
pub const DEFAULT_ORDER: usize = 20;
const MAX_TENSOR_NODES: usize = 4_000_000;

/// Ambient dimension `n` of the cylinder `R^k x S^{n-k}` and its axis dimension `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDims", into = "RawDims")]
pub struct Dimensions {
    n: usize,
    k: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDims {
    n: usize,
    k: usize,
}

impl TryFrom<RawDims> for Dimensions {
    type Error = Error;
    fn try_from(r: RawDims) -> Result<Self> {
        Dimensions::new(r.n, r.k)
    }
}

impl From<Dimensions> for RawDims {
    fn from(d: Dimensions) -> Self {
        RawDims { n: d.n, k: d.k }
    }
}

impl Dimensions {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n < 2 || k < 1 || k >= n {
            return Err(Error::Hermite(format!(
                "dimensions require 1 <= k < n and n >= 2, got n = {n}, k = {k}"
            )));
        }
        Ok(Dimensions { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Dimension `n - k` of the sphere factor.
    pub fn sphere_dim(&self) -> usize {
        self.n - self.k
    }

    /// Squared sphere radius `2(n - k)` of the round cylinder.
    pub fn radius_sq(&self) -> f64 {
        2.0 * self.sphere_dim() as f64
    }

    /// Ratio `||phi||^2_{cylinder} / ||phi||^2_{gaussian}` for rotationally
    /// symmetric `phi`, where the cylinder norm integrates against
    /// `exp(-|x|^2/4)` over `R^k x S^{n-k}(sqrt(2(n-k)))` with the round metric.
    pub fn cylinder_norm_sq_factor(&self) -> f64 {
        let m = self.sphere_dim();
        let gauss = (4.0 * PI).powf(self.k as f64 / 2.0);
        let sphere = 2.0 * PI.powf((m as f64 + 1.0) / 2.0) / gamma_half(m + 1)
            * self.radius_sq().powf(m as f64 / 2.0);
        gauss * sphere
    }

    /// Multiplier converting a Gaussian-normalized norm into the cylinder norm.
    pub fn cylinder_norm_factor(&self) -> f64 {
        self.cylinder_norm_sq_factor().sqrt()
    }
}

/// `Gamma(j / 2)` for a positive integer `j`, in closed form.
pub fn gamma_half(j: usize) -> f64 {
    assert!(j > 0, "gamma_half needs a positive argument");
    let mut g = if j % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut s = if j % 2 == 0 { 1.0 } else { 0.5 };
    while s + 0.25 < j as f64 / 2.0 {
        g *= s;
        s += 1.0;
    }
    g
}

/// Per-coordinate Hermite degrees of a mode.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(degrees: Vec<usize>) -> Self {
        assert!(!degrees.is_empty(), "multi-index needs k >= 1 entries");
        MultiIndex(degrees)
    }

    pub fn zero(k: usize) -> Self {
        MultiIndex(vec![0; k])
    }

    /// `e_i` (a degree-one mode).
    pub fn unit(k: usize, i: usize) -> Self {
        let mut d = vec![0; k];
        d[i] = 1;
        MultiIndex(d)
    }

    /// `e_i + e_j` (the degree-two mode for the quadratic pair `(i, j)`).
    pub fn pair(k: usize, i: usize, j: usize) -> Self {
        let mut d = vec![0; k];
        d[i] += 1;
        d[j] += 1;
        MultiIndex(d)
    }

    pub fn pure(k: usize, i: usize, deg: usize) -> Self {
        let mut d = vec![0; k];
        d[i] = deg;
        MultiIndex(d)
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.iter().sum()
    }

    /// Zero-pads to `k2 >= k` coordinates.
    pub fn embed(&self, k2: usize) -> Self {
        assert!(k2 >= self.k());
        let mut d = self.0.clone();
        d.resize(k2, 0);
        MultiIndex(d)
    }

    fn check_cap(&self, cap: usize) -> Result<()> {
        if self.degree() > cap {
            return Err(Error::Hermite(format!(
                "mode {self} of degree {} exceeds the degree cap {cap}",
                self.degree()
            )));
        }
        Ok(())
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// All multi-indices on R^k with total degree at most `cap`, in mode order.
pub fn basis(k: usize, cap: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; k];
    fn rec(pos: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
        if pos == cur.len() {
            out.push(MultiIndex(cur.clone()));
            return;
        }
        for d in 0..=left {
            cur[pos] = d;
            rec(pos + 1, left - d, cur, out);
        }
        cur[pos] = 0;
    }
    rec(0, cap, &mut cur, &mut out);
    out.sort();
    out
}

/// Closed forms of the low-degree one-variable polynomials.
pub fn hermite_closed_form(deg: usize, x: f64) -> Option<f64> {
    match deg {
        0 => Some(1.0),
        1 => Some(x / SQRT_2),
        2 => Some((x * x - 2.0) / (2.0 * SQRT_2)),
        4 => Some((x.powi(4) - 12.0 * x * x + 12.0) / (8.0 * 6f64.sqrt())),
        _ => None,
    }
}

/// Values `h_0(x), ..., h_max(x)` by the three-term recurrence
/// `h_{n+1} = ((x / sqrt 2) h_n - sqrt(n) h_{n-1}) / sqrt(n + 1)`.
pub fn hermite_1d_all(max: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(max + 1);
    h.push(1.0);
    if max == 0 {
        return h;
    }
    let t = x / SQRT_2;
    h.push(t);
    for n in 1..max {
        let next = (t * h[n] - (n as f64).sqrt() * h[n - 1]) / ((n + 1) as f64).sqrt();
        h.push(next);
    }
    h
}

pub fn hermite_1d(deg: usize, x: f64) -> f64 {
    hermite_1d_all(deg, x)[deg]
}

/// Value, first and second derivative tables for one coordinate:
/// `h_n' = sqrt(n/2) h_{n-1}`, `h_n'' = sqrt(n(n-1))/2 h_{n-2}`.
#[derive(Clone, Debug)]
pub struct Jet1d {
    pub h: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl Jet1d {
    pub fn new(max: usize, x: f64) -> Self {
        let h = hermite_1d_all(max, x);
        let mut d1 = vec![0.0; max + 1];
        let mut d2 = vec![0.0; max + 1];
        for n in 1..=max {
            d1[n] = (n as f64 / 2.0).sqrt() * h[n - 1];
        }
        for n in 2..=max {
            d2[n] = ((n * (n - 1)) as f64).sqrt() / 2.0 * h[n - 2];
        }
        Jet1d { h, d1, d2 }
    }
}

/// Evaluates the orthonormal mode `m` at `x`.
pub fn hermite_eval(m: &MultiIndex, x: &[f64], cap: usize) -> Result<f64> {
    m.check_cap(cap)?;
    if x.len() != m.k() {
        return Err(Error::Hermite(format!(
            "point has {} coordinates, mode has {}",
            x.len(),
            m.k()
        )));
    }
    Ok(m.0
        .iter()
        .zip(x)
        .map(|(&d, &xi)| hermite_1d(d, xi))
        .product())
}

/// Value, gradient and Hessian of a scalar field at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldJet {
    pub value: f64,
    pub grad: Vec<f64>,
    /// Row-major `k x k`.
    pub hess: Vec<f64>,
}

impl FieldJet {
    pub fn zero(k: usize) -> Self {
        FieldJet {
            value: 0.0,
            grad: vec![0.0; k],
            hess: vec![0.0; k * k],
        }
    }

    pub fn constant(k: usize, value: f64) -> Self {
        FieldJet {
            value,
            ..FieldJet::zero(k)
        }
    }

    pub fn k(&self) -> usize {
        self.grad.len()
    }

    /// `grad^2 u (grad u, grad u)`.
    pub fn hess_grad_grad(&self) -> f64 {
        let k = self.k();
        let mut s = 0.0;
        for i in 0..k {
            for j in 0..k {
                s += self.hess[i * k + j] * self.grad[i] * self.grad[j];
            }
        }
        s
    }

    pub fn grad_sq(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum()
    }
}

/// Gauss-Hermite rule for the normalized weight, tensorized over `k` coordinates.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    k: usize,
    order: usize,
    nodes_1d: Vec<f64>,
    weights_1d: Vec<f64>,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(k: usize, order: usize) -> Result<Self> {
        let deg = NonZeroUsize::new(order)
            .ok_or_else(|| Error::Hermite("quadrature order must be positive".into()))?;
        if k == 0 {
            return Err(Error::Hermite("quadrature needs k >= 1".into()));
        }
        let total = order
            .checked_pow(k as u32)
            .filter(|&t| t <= MAX_TENSOR_NODES)
            .ok_or_else(|| {
                Error::Hermite(format!("tensor rule {order}^{k} exceeds {MAX_TENSOR_NODES} nodes"))
            })?;
        // weight e^{-t^2} mapped to (4 pi)^{-1/2} e^{-x^2/4} by x = 2t
        let rule = GaussHermite::new(deg);
        let mut pairs: Vec<(f64, f64)> = rule
            .iter()
            .map(|(t, w)| (2.0 * t, w / PI.sqrt()))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let nodes_1d: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let weights_1d: Vec<f64> = pairs.iter().map(|p| p.1).collect();

        let mut points = Vec::with_capacity(total * k);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; k];
        for _ in 0..total {
            let mut w = 1.0;
            for &i in &idx {
                points.push(nodes_1d[i]);
                w *= weights_1d[i];
            }
            weights.push(w);
            for c in (0..k).rev() {
                idx[c] += 1;
                if idx[c] < order {
                    break;
                }
                idx[c] = 0;
            }
        }
        Ok(QuadratureRule {
            k,
            order,
            nodes_1d,
            weights_1d,
            points,
            weights,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes_1d(&self) -> &[f64] {
        &self.nodes_1d
    }

    pub fn weights_1d(&self) -> &[f64] {
        &self.weights_1d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.k..(i + 1) * self.k]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points.chunks(self.k).zip(self.weights.iter().copied())
    }

    /// Weighted sum of `f` over the nodes.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<f64> {
        let mut s = 0.0;
        for (x, w) in self.iter() {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::Hermite(format!("non-finite field value at node {x:?}")));
            }
            s += w * v;
        }
        Ok(s)
    }
}

/// `<f, g>` against the normalized Gaussian weight.
pub fn inner<F, G>(f: F, g: G, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    let mut s = 0.0;
    for (x, w) in rule.iter() {
        let a = f(x);
        let b = g(x);
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::Hermite(format!("non-finite field value at node {x:?}")));
        }
        s += w * a * b;
    }
    Ok(s)
}

/// Coefficients of `f` against every mode up to `cap`.
pub fn project<F: Fn(&[f64]) -> f64>(f: F, cap: usize, rule: &QuadratureRule) -> Result<ModeVector> {
    let k = rule.k();
    let modes = basis(k, cap);
    let mut acc = vec![0.0; modes.len()];
    for (x, w) in rule.iter() {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::Hermite(format!("non-finite field value at node {x:?}")));
        }
        if v == 0.0 {
            continue;
        }
        let tables: Vec<Vec<f64>> = x.iter().map(|&xi| hermite_1d_all(cap, xi)).collect();
        let wv = w * v;
        for (a, m) in acc.iter_mut().zip(&modes) {
            let mut p = 1.0;
            for (c, &d) in m.0.iter().enumerate() {
                p *= tables[c][d];
            }
            *a += wv * p;
        }
    }
    let mut out = ModeVector::zero(k, cap);
    for (m, a) in modes.into_iter().zip(acc) {
        out.set(m, a);
    }
    Ok(out)
}

/// Expansion of the product `p_{m1} p_{m2}` in the orthonormal basis.
pub fn product_expand(m1: &MultiIndex, m2: &MultiIndex, cap: usize) -> Result<ModeVector> {
    m1.check_cap(cap)?;
    m2.check_cap(cap)?;
    if m1.k() != m2.k() {
        return Err(Error::Hermite("product of modes with different k".into()));
    }
    let k = m1.k();
    let top = m1.degree() + m2.degree();
    let rule = QuadratureRule::new(k, (top + 1).max(DEFAULT_ORDER).min(64))?;
    let full = project(
        |x| {
            let a: f64 = m1.0.iter().zip(x).map(|(&d, &xi)| hermite_1d(d, xi)).product();
            let b: f64 = m2.0.iter().zip(x).map(|(&d, &xi)| hermite_1d(d, xi)).product();
            a * b
        },
        top,
        &rule,
    )?;
    let mut out = ModeVector::zero(k, 2 * cap);
    for (m, c) in full.iter() {
        out.set(m.clone(), c);
    }
    Ok(out)
}

/// Eigenvalue `1 - d/2` of `L = Delta_f + 1` on a degree-`d` mode.
pub fn l_eigenvalue(m: &MultiIndex) -> f64 {
    1.0 - m.degree() as f64 / 2.0
}

pub fn apply_l(v: &ModeVector) -> ModeVector {
    let mut out = v.clone();
    for (m, c) in out.coeffs.iter_mut() {
        *c *= l_eigenvalue(m);
    }
    out
}

/// Maximum deviation of the Gram matrix from the identity over all modes up to `cap`.
pub fn gram_error(k: usize, cap: usize, rule: &QuadratureRule) -> f64 {
    let modes = basis(k, cap);
    let nm = modes.len();
    let mut gram = vec![0.0; nm * nm];
    let mut vals = vec![0.0; nm];
    for (x, w) in rule.iter() {
        let tables: Vec<Vec<f64>> = x.iter().map(|&xi| hermite_1d_all(cap, xi)).collect();
        for (v, m) in vals.iter_mut().zip(&modes) {
            *v = m.0.iter().enumerate().map(|(c, &d)| tables[c][d]).product();
        }
        for a in 0..nm {
            let wa = w * vals[a];
            for b in a..nm {
                gram[a * nm + b] += wa * vals[b];
            }
        }
    }
    let mut err: f64 = 0.0;
    for a in 0..nm {
        for b in a..nm {
            let target = if a == b { 1.0 } else { 0.0 };
            err = err.max((gram[a * nm + b] - target).abs());
        }
    }
    err
}

/// Sparse coefficient vector over Hermite modes with a degree cap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeVector {
    k: usize,
    cap: usize,
    coeffs: BTreeMap<MultiIndex, f64>,
}

impl ModeVector {
    pub fn zero(k: usize, cap: usize) -> Self {
        ModeVector {
            k,
            cap,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn unit(m: MultiIndex, cap: usize) -> Self {
        let mut v = ModeVector::zero(m.k(), cap);
        v.set(m, 1.0);
        v
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn get(&self, m: &MultiIndex) -> f64 {
        self.coeffs.get(m).copied().unwrap_or(0.0)
    }

    /// Sets a coefficient; panics if `m` violates the cap or `k`.
    pub fn set(&mut self, m: MultiIndex, c: f64) {
        assert_eq!(m.k(), self.k, "mode {m} has the wrong number of coordinates");
        assert!(m.degree() <= self.cap, "mode {m} exceeds cap {}", self.cap);
        if c == 0.0 {
            self.coeffs.remove(&m);
        } else {
            self.coeffs.insert(m, c);
        }
    }

    pub fn add_to(&mut self, m: MultiIndex, c: f64) {
        let v = self.get(&m) + c;
        self.set(m, v);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> + '_ {
        self.coeffs.iter().map(|(m, &c)| (m, c))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.values().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = ModeVector::zero(self.k, self.cap);
        for (m, c) in self.iter() {
            out.set(m.clone(), s * c);
        }
        out
    }

    /// `self + s * other`; the cap of the result is the larger cap.
    pub fn axpy(&self, s: f64, other: &ModeVector) -> Self {
        assert_eq!(self.k, other.k);
        let mut out = self.clone();
        out.cap = self.cap.max(other.cap);
        for (m, c) in other.iter() {
            out.add_to(m.clone(), s * c);
        }
        out
    }

    pub fn filter<P: Fn(&MultiIndex) -> bool>(&self, keep: P) -> Self {
        let mut out = ModeVector::zero(self.k, self.cap);
        for (m, c) in self.iter() {
            if keep(m) {
                out.set(m.clone(), c);
            }
        }
        out
    }

    /// Part of total degree exactly `d`.
    pub fn degree_part(&self, d: usize) -> Self {
        self.filter(|m| m.degree() == d)
    }

    /// Modes with `L`-eigenvalue strictly above `lambda`.
    pub fn above(&self, lambda: f64) -> Self {
        self.filter(|m| l_eigenvalue(m) > lambda)
    }

    pub fn with_cap(&self, cap: usize) -> Self {
        let mut out = ModeVector::zero(self.k, cap);
        for (m, c) in self.iter() {
            if m.degree() <= cap {
                out.set(m.clone(), c);
            }
        }
        out
    }

    pub fn max_degree(&self) -> usize {
        self.coeffs.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn embed(&self, k2: usize) -> Self {
        let mut out = ModeVector::zero(k2, self.cap);
        for (m, c) in self.iter() {
            out.set(m.embed(k2), c);
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let top = self.max_degree();
        let tables: Vec<Vec<f64>> = x.iter().map(|&xi| hermite_1d_all(top, xi)).collect();
        self.iter()
            .map(|(m, c)| c * m.0.iter().enumerate().map(|(i, &d)| tables[i][d]).product::<f64>())
            .sum()
    }

    pub fn eval_jet(&self, x: &[f64]) -> FieldJet {
        let k = self.k;
        let top = self.max_degree();
        let jets: Vec<Jet1d> = x.iter().map(|&xi| Jet1d::new(top, xi)).collect();
        let mut out = FieldJet::zero(k);
        for (m, c) in self.iter() {
            let d = &m.0;
            let val: f64 = (0..k).map(|i| jets[i].h[d[i]]).product();
            out.value += c * val;
            for a in 0..k {
                let mut g = c * jets[a].d1[d[a]];
                for i in 0..k {
                    if i != a {
                        g *= jets[i].h[d[i]];
                    }
                }
                out.grad[a] += g;
                for b in 0..k {
                    let mut hh = c;
                    for i in 0..k {
                        hh *= if a == b && i == a {
                            jets[i].d2[d[i]]
                        } else if i == a || i == b {
                            jets[i].d1[d[i]]
                        } else {
                            jets[i].h[d[i]]
                        };
                    }
                    out.hess[a * k + b] += hh;
                }
            }
        }
        out
    }
}

/// Bilinear product of two mode vectors, expanded by quadrature.
pub fn product(v1: &ModeVector, v2: &ModeVector, rule: &QuadratureRule) -> Result<ModeVector> {
    let cap = v1.max_degree() + v2.max_degree();
    if rule.order() <= cap {
        return Err(Error::Hermite(format!(
            "quadrature order {} cannot resolve a degree-{cap} product",
            rule.order()
        )));
    }
    project(|x| v1.eval(x) * v2.eval(x), cap, rule)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrence_matches_closed_forms() {
        for i in 0..50 {
            let x = -9.0 + 0.37 * i as f64;
            let h = hermite_1d_all(8, x);
            for d in [0, 1, 2, 4] {
                let cf = hermite_closed_form(d, x).unwrap();
                assert!((h[d] - cf).abs() <= 1e-12 * (1.0 + cf.abs()), "d={d} x={x}");
            }
        }
    }

    #[test]
    fn closed_form_values() {
        let m = MultiIndex::unit(2, 0);
        assert!((hermite_eval(&m, &[2.0, 0.0], 8).unwrap() - SQRT_2).abs() < 1e-15);
        let m = MultiIndex::pair(1, 0, 0);
        assert!((hermite_eval(&m, &[0.0], 8).unwrap() + 1.0 / SQRT_2).abs() < 1e-15);
        let m = MultiIndex::pure(1, 0, 4);
        let want = 12.0 / (8.0 * 6f64.sqrt());
        assert!((hermite_eval(&m, &[0.0], 8).unwrap() - want).abs() < 1e-15);
        assert_eq!(hermite_eval(&MultiIndex::zero(3), &[1.0, 2.0, 3.0], 8).unwrap(), 1.0);
        assert!(hermite_eval(&MultiIndex::pure(1, 0, 9), &[0.0], 8).is_err());
    }

    #[test]
    fn weights_sum_to_one() {
        for q in [1, 5, 20, 41] {
            let r = QuadratureRule::new(1, q).unwrap();
            let s: f64 = r.weights_1d().iter().sum();
            assert!((s - 1.0).abs() < 1e-13, "q={q} s={s}");
        }
    }

    #[test]
    fn gamma_half_values() {
        assert!((gamma_half(1) - PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half(2), 1.0);
        assert!((gamma_half(3) - PI.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(gamma_half(6), 2.0);
        assert!((gamma_half(7) - 15.0 / 8.0 * PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn cylinder_factor_k1_n2() {
        // R x S^1 of radius sqrt 2: (4 pi)^{1/2} * 2 pi sqrt 2
        let d = Dimensions::new(2, 1).unwrap();
        let want = (4.0 * PI).sqrt() * 2.0 * PI * SQRT_2;
        assert!((d.cylinder_norm_sq_factor() - want).abs() < 1e-12 * want);
    }

    #[test]
    fn basis_counts_and_order() {
        assert_eq!(basis(1, 8).len(), 9);
        assert_eq!(basis(2, 8).len(), 45);
        assert_eq!(basis(3, 8).len(), 165);
        let b = basis(2, 2);
        assert_eq!(b[0], MultiIndex::zero(2));
        assert_eq!(b[1], MultiIndex::unit(2, 0));
        assert_eq!(b[2], MultiIndex::unit(2, 1));
    }

    #[test]
    fn jet_matches_finite_differences() {
        let mut v = ModeVector::zero(2, 8);
        v.set(MultiIndex::new(vec![2, 1]), 0.7);
        v.set(MultiIndex::new(vec![0, 3]), -0.3);
        v.set(MultiIndex::new(vec![4, 4]), 0.1);
        let x = [0.4, -1.1];
        let j = v.eval_jet(&x);
        let e = 1e-5;
        for a in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += e;
            xm[a] -= e;
            let g = (v.eval(&xp) - v.eval(&xm)) / (2.0 * e);
            assert!((g - j.grad[a]).abs() < 1e-7);
            let jp = v.eval_jet(&xp);
            let jm = v.eval_jet(&xm);
            for b in 0..2 {
                let h = (jp.grad[b] - jm.grad[b]) / (2.0 * e);
                assert!((h - j.hess[a * 2 + b]).abs() < 1e-6);
            }
        }
        assert!((j.value - v.eval(&x)).abs() < 1e-14);
    }
}
