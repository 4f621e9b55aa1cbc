//! Leading-mode ODE of the linear-dominant regime, the asymptotic coefficients
//! `(a_bar, b_bar)` and their transformation laws.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions, Output, Termination};
use crate::symmetric::SymMatrixK;
use crate::taylor::{self, LeadingModes};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearAsymptotics {
    pub a_bar: f64,
    pub b_bar: Vec<f64>,
}

impl LinearAsymptotics {
    pub fn new(a_bar: f64, b_bar: Vec<f64>) -> Self {
        LinearAsymptotics { a_bar, b_bar }
    }

    pub fn k(&self) -> usize {
        self.b_bar.len()
    }

    pub fn b_sq(&self) -> f64 {
        self.b_bar.iter().map(|b| b * b).sum()
    }

    /// The expansion `sum b_i e^{tau/2} p1_i + (a - |b|^2 tau/2) e^tau p0 - (1/sqrt2) b_i b_j e^tau p2_ij`.
    pub fn ansatz(&self, tau: f64) -> LeadingModes {
        let k = self.k();
        let e = tau.exp();
        let eh = (0.5 * tau).exp();
        let mut c = SymMatrixK::zeros(k);
        for i in 0..k {
            for j in i..k {
                c.set(i, j, -FRAC_1_SQRT_2 * self.b_bar[i] * self.b_bar[j] * e);
            }
        }
        LeadingModes {
            a: (self.a_bar - 0.5 * self.b_sq() * tau) * e,
            b: self.b_bar.iter().map(|b| b * eh).collect(),
            c,
        }
    }
}

/// `LU + Q2(U)` restricted to the constant, linear and quadratic modes.
pub fn leading_ode_rhs(u: &LeadingModes) -> LeadingModes {
    let q = taylor::q2_leading(u);
    LeadingModes {
        a: u.a + q.a,
        b: u.b.iter().zip(&q.b).map(|(b, qb)| 0.5 * b + qb).collect(),
        c: q.c,
    }
}

fn flat_len(k: usize) -> usize {
    1 + k + k * (k + 1) / 2
}

/// Packs `(a, b, upper triangle of c)`.
pub fn pack(u: &LeadingModes) -> Vec<f64> {
    let k = u.k();
    let mut y = Vec::with_capacity(flat_len(k));
    y.push(u.a);
    y.extend_from_slice(&u.b);
    for i in 0..k {
        for j in i..k {
            y.push(u.c.get(i, j));
        }
    }
    y
}

pub fn unpack(k: usize, y: &[f64]) -> LeadingModes {
    let mut c = SymMatrixK::zeros(k);
    let mut p = 1 + k;
    for i in 0..k {
        for j in i..k {
            c.set(i, j, y[p]);
            p += 1;
        }
    }
    LeadingModes {
        a: y[0],
        b: y[1..1 + k].to_vec(),
        c,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeadingTrajectory {
    pub tau: Vec<f64>,
    pub states: Vec<LeadingModes>,
}

impl LeadingTrajectory {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Samples of an explicit function of `tau`.
    pub fn from_fn<F: Fn(f64) -> LeadingModes>(taus: &[f64], f: F) -> Self {
        LeadingTrajectory {
            tau: taus.to_vec(),
            states: taus.iter().map(|&t| f(t)).collect(),
        }
    }
}

/// Integrates the leading-mode system, output every `dt`. Fails once `|U| > 1`.
pub fn integrate_leading(u0: &LeadingModes, tau_span: (f64, f64), dt: f64) -> Result<LeadingTrajectory> {
    let k = u0.k();
    let (t0, t1) = tau_span;
    if !(dt > 0.0) {
        return Err(Error::Linear(format!("output step must be positive, got {dt}")));
    }
    let n = ((t1 - t0).abs() / dt).ceil().max(1.0) as usize;
    let times: Vec<f64> = (1..=n).map(|i| t0 + (t1 - t0) * i as f64 / n as f64).collect();
    let opts = OdeOptions {
        h_max: dt,
        rtol: 1e-11,
        atol: 1e-16,
        ..Default::default()
    };
    let sol = ode::dopri5(
        |_, y, dy| dy.copy_from_slice(&pack(&leading_ode_rhs(&unpack(k, y)))),
        t0,
        &pack(u0),
        t1,
        &opts,
        Output::At(&times),
        |_, y| y.iter().map(|v| v * v).sum::<f64>() > 1.0,
    )?;
    if sol.termination == Termination::Guard {
        let (t, y) = sol.last();
        return Err(Error::BlowUp {
            tau: t,
            size: unpack(k, y).norm(),
        });
    }
    Ok(LeadingTrajectory {
        tau: sol.t,
        states: sol.y.iter().map(|y| unpack(k, y)).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub a_bar: f64,
    pub b_bar: Vec<f64>,
    /// Largest deviation of the trajectory from the fitted expansion over the window.
    pub residual: f64,
    pub window: (f64, f64),
}

impl AsymptoticsReport {
    pub fn asymptotics(&self) -> LinearAsymptotics {
        LinearAsymptotics::new(self.a_bar, self.b_bar.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn model_residuals(p: &[f64], k: usize, tau: &[f64], obs: &[LeadingModes]) -> Vec<f64> {
    let asym = LinearAsymptotics::new(p[0], p[1..].to_vec());
    let mut r = Vec::new();
    for (&t, u) in tau.iter().zip(obs) {
        let m = asym.ansatz(t);
        let (sh, s) = ((-0.5 * t).exp(), (-t).exp());
        for i in 0..k {
            r.push((u.b[i] - m.b[i]) * sh);
        }
        r.push((u.a - m.a) * s);
        for i in 0..k {
            for j in i..k {
                r.push((u.c.get(i, j) - m.c.get(i, j)) * s);
            }
        }
    }
    r
}

/// Least-squares fit of `(a_bar, b_bar)` over samples with `tau` in `window`.
pub fn extract_asymptotics(traj: &LeadingTrajectory, window: (f64, f64)) -> Result<AsymptoticsReport> {
    let (lo, hi) = window;
    let idx: Vec<usize> = (0..traj.len()).filter(|&i| traj.tau[i] >= lo && traj.tau[i] <= hi).collect();
    if idx.is_empty() {
        return Err(Error::Linear(format!("no samples in window [{lo}, {hi}]")));
    }
    let k = traj.states[idx[0]].k();
    let tau: Vec<f64> = idx.iter().map(|&i| traj.tau[i]).collect();
    let obs: Vec<LeadingModes> = idx.iter().map(|&i| traj.states[i].clone()).collect();
    if obs.iter().all(|u| u.norm() == 0.0) {
        return Ok(AsymptoticsReport {
            a_bar: 0.0,
            b_bar: vec![0.0; k],
            residual: 0.0,
            window,
        });
    }
    for (t, u) in tau.iter().zip(&obs) {
        let bn = u.b.iter().map(|b| b * b).sum::<f64>().sqrt();
        if u.c.frobenius() > bn.max(u.a.abs()) {
            return Err(Error::Linear(format!(
                "quadratic modes dominate at tau = {t}; trajectory is not linear-dominated"
            )));
        }
    }
    // b channel divided by e^{tau/2}, then a channel divided by e^tau with the tau-linear term moved over
    let m = tau.len() as f64;
    let b: Vec<f64> = (0..k)
        .map(|i| tau.iter().zip(&obs).map(|(t, u)| u.b[i] * (-0.5 * t).exp()).sum::<f64>() / m)
        .collect();
    let bsq: f64 = b.iter().map(|x| x * x).sum();
    let a = tau
        .iter()
        .zip(&obs)
        .map(|(t, u)| u.a * (-t).exp() + 0.5 * bsq * t)
        .sum::<f64>()
        / m;
    let mut p = vec![a];
    p.extend(b);

    // one Gauss-Newton pass on the joint scaled residual
    let r0 = model_residuals(&p, k, &tau, &obs);
    let np = p.len();
    let mut jac = DMatrix::<f64>::zeros(r0.len(), np);
    for c in 0..np {
        let step = 1e-7 * p[c].abs().max(1e-3);
        let mut q = p.clone();
        q[c] += step;
        let r1 = model_residuals(&q, k, &tau, &obs);
        for (row, (x1, x0)) in r1.iter().zip(&r0).enumerate() {
            jac[(row, c)] = (x1 - x0) / step;
        }
    }
    let rhs = DVector::from_vec(r0.iter().map(|x| -x).collect());
    if let Ok(delta) = jac.clone().svd(true, true).solve(&rhs, 1e-14) {
        let cand: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        if norm(&model_residuals(&cand, k, &tau, &obs)) <= norm(&r0) {
            p = cand;
        }
    }

    let asym = LinearAsymptotics::new(p[0], p[1..].to_vec());
    let residual = tau
        .iter()
        .zip(&obs)
        .map(|(t, u)| leading_distance(u, &asym.ansatz(*t)))
        .fold(0.0, f64::max);
    Ok(AsymptoticsReport {
        a_bar: asym.a_bar,
        b_bar: asym.b_bar,
        residual,
        window,
    })
}

/// Mode-space distance between two leading-mode states.
pub fn leading_distance(u: &LeadingModes, v: &LeadingModes) -> f64 {
    let d = LeadingModes {
        a: u.a - v.a,
        b: u.b.iter().zip(&v.b).map(|(x, y)| x - y).collect(),
        c: u.c.sub(&v.c),
    };
    d.norm()
}

/// Shift of basepoint by `p` and time by `d_t`, followed by parabolic scaling by `alpha`.
pub fn transform_asymptotics(asym: &LinearAsymptotics, alpha: f64, p: &[f64], d_t: f64) -> Result<LinearAsymptotics> {
    if !(alpha > 0.0) {
        return Err(Error::Linear(format!("scale must be positive, got {alpha}")));
    }
    if p.len() != asym.k() {
        return Err(Error::Linear(format!(
            "shift has {} components, expected {}",
            p.len(),
            asym.k()
        )));
    }
    let drift: f64 = asym.b_bar.iter().zip(p).map(|(b, q)| (b / SQRT_2) * q).sum();
    let a1 = asym.a_bar + (0.5 * d_t - drift);
    if alpha == 1.0 {
        return Ok(LinearAsymptotics::new(a1, asym.b_bar.clone()));
    }
    let a2 = alpha * alpha;
    Ok(LinearAsymptotics::new(
        a2 * a1 - asym.b_sq() * a2 * alpha.ln(),
        asym.b_bar.iter().map(|b| alpha * b).collect(),
    ))
}

/// `b_bar_k` of the bowl factor.
pub fn bowl_constant() -> f64 {
    FRAC_1_SQRT_2
}

/// Whether the combined shift `(dT e_k, dT)` fixes `a_bar` exactly.
pub fn bowl_fixed_point(b_k: f64, a_bar: f64, d_t: f64, k: usize) -> Result<bool> {
    let mut b = vec![0.0; k];
    b[k - 1] = b_k;
    let asym = LinearAsymptotics::new(a_bar, b);
    let mut p = vec![0.0; k];
    p[k - 1] = d_t;
    let out = transform_asymptotics(&asym, 1.0, &p, d_t)?;
    Ok(out.a_bar == a_bar)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_examples() {
        let z = LeadingModes::zero(2);
        assert_eq!(leading_ode_rhs(&z), z);
        let mut u = LeadingModes::zero(1);
        u.a = 0.3;
        let r = leading_ode_rhs(&u);
        assert!((r.a - (0.3 - 0.045)).abs() < 1e-16);
        let asym = LinearAsymptotics::new(0.0, vec![0.2]);
        let tau = -3.0;
        let mut u = LeadingModes::zero(1);
        u.b = asym.ansatz(tau).b;
        let r = leading_ode_rhs(&u);
        assert!((r.c.get(0, 0) + FRAC_1_SQRT_2 * 0.04 * tau.exp()).abs() < 1e-16);
    }

    #[test]
    fn pack_round_trip() {
        let u = LeadingModes {
            a: 1.0,
            b: vec![2.0, 3.0],
            c: SymMatrixK::from_rows(&[vec![4.0, 5.0], vec![5.0, 6.0]]).unwrap(),
        };
        assert_eq!(pack(&u), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(unpack(2, &pack(&u)), u);
    }

    #[test]
    fn bowl() {
        assert_eq!(bowl_constant(), 0.7071067811865476);
        for d in [1.0, -1.0, 5.0, -5.0] {
            assert!(bowl_fixed_point(bowl_constant(), 0.37, d, 2).unwrap());
            assert!(!bowl_fixed_point(0.7, 0.37, d, 2).unwrap());
        }
    }
}
