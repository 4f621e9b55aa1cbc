//! Exact polynomial oracle: Hermite functions as monomial expansions, Gaussian
//! moments for `x ~ N(0, 2)` in each coordinate.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

#[derive(Clone, Debug, Default)]
pub struct Poly {
    pub k: usize,
    pub terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(k: usize) -> Self {
        Poly { k, terms: BTreeMap::new() }
    }

    pub fn constant(k: usize, c: f64) -> Self {
        let mut p = Poly::zero(k);
        p.add_term(vec![0; k], c);
        p
    }

    fn add_term(&mut self, e: Vec<u32>, c: f64) {
        if c != 0.0 {
            *self.terms.entry(e).or_insert(0.0) += c;
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (e, c) in &o.terms {
            r.add_term(e.clone(), *c);
        }
        r
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly {
            k: self.k,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect(),
        }
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut r = Poly::zero(self.k);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                r.add_term(e, c1 * c2);
            }
        }
        r
    }

    pub fn diff(&self, i: usize) -> Poly {
        let mut r = Poly::zero(self.k);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                r.add_term(e2, c * e[i] as f64);
            }
        }
        r
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(p, xi)| xi.powi(*p as i32)).product::<f64>())
            .sum()
    }

    /// Gaussian expectation.
    pub fn mean(&self) -> f64 {
        self.terms.iter().map(|(e, c)| c * e.iter().map(|&p| moment(p)).product::<f64>()).sum()
    }
}

/// `E[x^p]` for `x ~ N(0, 2)`.
pub fn moment(p: u32) -> f64 {
    if p % 2 == 1 {
        return 0.0;
    }
    let mut m = 1.0;
    let mut j = 1;
    while j < p {
        m *= j as f64;
        j += 2;
    }
    m * 2f64.powi((p / 2) as i32)
}

/// `He_n(x / sqrt2) / sqrt(n!)` in variable `i` of `k`.
pub fn hermite(k: usize, i: usize, n: usize) -> Poly {
    // probabilists' recursion on coefficient vectors in y
    let mut prev = vec![1.0];
    let mut cur = vec![0.0, 1.0];
    let coeffs = if n == 0 {
        prev
    } else {
        for m in 1..n {
            let mut next = vec![0.0; m + 2];
            for (p, c) in cur.iter().enumerate() {
                next[p + 1] += c;
            }
            for (p, c) in prev.iter().enumerate() {
                next[p] -= m as f64 * c;
            }
            prev = cur;
            cur = next;
        }
        cur
    };
    let fact: f64 = (1..=n).map(|j| j as f64).product();
    let mut out = Poly::zero(k);
    for (p, c) in coeffs.iter().enumerate() {
        let mut e = vec![0; k];
        e[i] = p as u32;
        out.add_term(e, c / SQRT_2.powi(p as i32) / fact.sqrt());
    }
    out
}

pub fn mode(degrees: &[usize]) -> Poly {
    let k = degrees.len();
    degrees
        .iter()
        .enumerate()
        .fold(Poly::constant(k, 1.0), |acc, (i, &d)| acc.mul(&hermite(k, i, d)))
}

/// `a + sum b_i h1(x_i) + sum_i c_ii h2(x_i) + sum_{i<j} 2 c_ij h1(x_i) h1(x_j) / sqrt2`.
pub fn leading(a: f64, b: &[f64], c: &[Vec<f64>]) -> Poly {
    let k = b.len();
    let mut u = Poly::constant(k, a);
    for i in 0..k {
        u = u.add(&hermite(k, i, 1).scale(b[i]));
        u = u.add(&hermite(k, i, 2).scale(c[i][i]));
        for j in i + 1..k {
            u = u.add(&hermite(k, i, 1).mul(&hermite(k, j, 1)).scale(SQRT_2 * c[i][j]));
        }
    }
    u
}

/// All multi-indices of total degree `<= d` in `k` variables.
pub fn indices(k: usize, d: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 0..=d {
        for rest in indices(k - 1, d - first) {
            let mut v = vec![first];
            v.extend(rest);
            out.push(v);
        }
    }
    out
}

/// The cubic Taylor polynomial `-u^2/2 + u^3/2 - 2m Hess u(grad u, grad u)`.
pub fn q3(u: &Poly, m: usize) -> Poly {
    let k = u.k;
    let u2 = u.mul(u);
    let grads: Vec<Poly> = (0..k).map(|i| u.diff(i)).collect();
    let mut hgg = Poly::zero(k);
    for i in 0..k {
        for j in 0..k {
            hgg = hgg.add(&grads[i].diff(j).mul(&grads[i]).mul(&grads[j]));
        }
    }
    u2.scale(-0.5).add(&u2.mul(u).scale(0.5)).add(&hgg.scale(-2.0 * m as f64))
}
