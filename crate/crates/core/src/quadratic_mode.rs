//! Matrix ODE `dU = -sqrt2 U^2 + 2 tr(U^2) U + C* U^3` of the quadratic-dominant
//! regime: spectral reduction, the invariant `Q_k`, its inverse and asymptotic fits.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions, Output, Termination};
use crate::symmetric::SymMatrixK;
use crate::taylor;

/// Eigenvalues below `-BLOWUP_GUARD` end a trajectory.
pub const BLOWUP_GUARD: f64 = 1e3;
/// Extension step when searching for the threshold crossing.
pub const CHUNK: f64 = 100.0;
pub const BISECTION_TOL: f64 = 1e-10;
const MAX_CHUNKS: usize = 1_000_000;

/// Eigenvalues with `|lambda| <= SNAP * max |lambda|` are set to exactly zero.
const SNAP: f64 = 1e-13;

/// Orthogonal diagonalization with descending eigenvalues and sign-fixed columns.
pub fn spectral_reduce(u0: &SymMatrixK) -> (DMatrix<f64>, Vec<f64>) {
    u0.spectral()
}

fn snapped(mut lam: Vec<f64>) -> Vec<f64> {
    let scale = lam.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for l in lam.iter_mut() {
        if l.abs() <= SNAP * scale {
            *l = 0.0;
        }
    }
    lam
}

/// Right-hand side of the eigenvalue system.
pub fn eigen_rhs(lam: &[f64], cstar: f64, out: &mut [f64]) {
    let trsq: f64 = lam.iter().map(|l| l * l).sum();
    for (o, &l) in out.iter_mut().zip(lam) {
        *o = taylor::bar_q_scalar(l, trsq, cstar);
    }
}

fn opts() -> OdeOptions {
    OdeOptions {
        rtol: 1e-12,
        atol: 1e-300,
        ..Default::default()
    }
}

/// Sampled solution on a frozen eigenframe.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralTrajectory {
    pub frame: DMatrix<f64>,
    pub cstar: f64,
    pub tau: Vec<f64>,
    pub lambdas: Vec<Vec<f64>>,
    /// Last accepted time when the blow-up guard ended the integration.
    pub blowup: Option<f64>,
}

impl SpectralTrajectory {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn state(&self, i: usize) -> SymMatrixK {
        SymMatrixK::from_spectral(&self.frame, &self.lambdas[i])
    }

    pub fn handle(&self) -> BarU {
        BarU {
            frame: self.frame.clone(),
            tau_ref: self.tau[0],
            lambda_ref: self.lambdas[0].clone(),
            cstar: self.cstar,
        }
    }
}

/// Integrates from `u0` at `tau0` to `tau1` (either direction).
pub fn integrate_bar_u(
    u0: &SymMatrixK,
    tau0: f64,
    tau1: f64,
    cstar: f64,
    output: Output<'_>,
) -> Result<SpectralTrajectory> {
    BarU::new(u0, tau0, cstar)?.integrate(tau1, output)
}

/// A solution of the matrix ODE identified by its state at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct BarU {
    pub frame: DMatrix<f64>,
    pub tau_ref: f64,
    pub lambda_ref: Vec<f64>,
    pub cstar: f64,
}

impl BarU {
    /// Requires `u0` non-positive definite.
    pub fn new(u0: &SymMatrixK, tau0: f64, cstar: f64) -> Result<Self> {
        let (frame, lam) = spectral_reduce(u0);
        let lam = snapped(lam);
        if lam.iter().any(|&l| l > 0.0) {
            return Err(Error::Quadratic(format!(
                "initial matrix must be non-positive definite, eigenvalues {lam:?}"
            )));
        }
        Ok(BarU {
            frame,
            tau_ref: tau0,
            lambda_ref: lam,
            cstar,
        })
    }

    pub fn zero(k: usize, cstar: f64) -> Self {
        BarU {
            frame: DMatrix::identity(k, k),
            tau_ref: 0.0,
            lambda_ref: vec![0.0; k],
            cstar,
        }
    }

    pub fn k(&self) -> usize {
        self.lambda_ref.len()
    }

    pub fn is_zero(&self) -> bool {
        self.lambda_ref.iter().all(|&l| l == 0.0)
    }

    pub fn integrate(&self, tau1: f64, output: Output<'_>) -> Result<SpectralTrajectory> {
        let cstar = self.cstar;
        let sol = ode::dopri5(
            |_, y, dy| eigen_rhs(y, cstar, dy),
            self.tau_ref,
            &self.lambda_ref,
            tau1,
            &opts(),
            output,
            |_, y| y.iter().any(|&l| l < -BLOWUP_GUARD || !l.is_finite()),
        )?;
        let blowup = (sol.termination == Termination::Guard).then(|| sol.last().0);
        Ok(SpectralTrajectory {
            frame: self.frame.clone(),
            cstar,
            tau: sol.t,
            lambdas: sol.y,
            blowup,
        })
    }

    /// Eigenvalues at `tau`; an error past the maximal existence time.
    pub fn lambdas_at(&self, tau: f64) -> Result<Vec<f64>> {
        if tau == self.tau_ref {
            return Ok(self.lambda_ref.clone());
        }
        let tr = self.integrate(tau, Output::At(&[]))?;
        if let Some(t) = tr.blowup {
            return Err(Error::BlowUp {
                tau: t,
                size: tr.lambdas.last().unwrap().iter().fold(0.0, |m: f64, x| m.max(x.abs())),
            });
        }
        Ok(tr.lambdas.last().unwrap().clone())
    }

    pub fn state_at(&self, tau: f64) -> Result<SymMatrixK> {
        Ok(SymMatrixK::from_spectral(&self.frame, &self.lambdas_at(tau)?))
    }

    /// Same solution re-anchored at `tau`.
    pub fn rebase(&self, tau: f64) -> Result<BarU> {
        Ok(BarU {
            frame: self.frame.clone(),
            tau_ref: tau,
            lambda_ref: self.lambdas_at(tau)?,
            cstar: self.cstar,
        })
    }

    /// `U(tau - shift)`.
    pub fn time_shifted(&self, shift: f64) -> BarU {
        BarU {
            tau_ref: self.tau_ref + shift,
            ..self.clone()
        }
    }

    /// `S^T U S`.
    pub fn conjugated(&self, s: &DMatrix<f64>) -> Result<BarU> {
        let u = SymMatrixK::from_spectral(&self.frame, &self.lambda_ref).conjugate(s);
        BarU::new(&u, self.tau_ref, self.cstar)
    }

    /// Zero-padding to `k2 >= k`.
    pub fn embed(&self, k2: usize) -> BarU {
        let k = self.k();
        assert!(k2 >= k);
        let mut frame = DMatrix::identity(k2, k2);
        frame.view_mut((0, 0), (k, k)).copy_from(&self.frame);
        let mut lam = self.lambda_ref.clone();
        lam.resize(k2, 0.0);
        BarU {
            frame,
            tau_ref: self.tau_ref,
            lambda_ref: lam,
            cstar: self.cstar,
        }
    }
}

fn lambda_min(l: &[f64]) -> f64 {
    l.iter().copied().fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QInvariant {
    pub q: SymMatrixK,
    /// `None` for the zero solution.
    pub tau_u: Option<f64>,
    pub c: f64,
}

/// `Q_k(U) = -c^{-1} e^{-tau_U/2} U(tau_U)` with `lambda_min(U(tau_U)) = -c`.
pub fn q_invariant(u: &BarU) -> Result<QInvariant> {
    let c = taylor::threshold_c(u.cstar);
    let k = u.k();
    if u.is_zero() {
        return Ok(QInvariant {
            q: SymMatrixK::zeros(k),
            tau_u: None,
            c,
        });
    }
    if u.lambda_ref.iter().any(|&l| l > 0.0) {
        return Err(Error::Quadratic("solution is not non-positive definite".into()));
    }
    let tau_u = threshold_time(u, c)?;
    let lam = u.lambdas_at(tau_u)?;
    let s = -(-0.5 * tau_u).exp() / c;
    let q: Vec<f64> = lam.iter().map(|l| s * l).collect();
    Ok(QInvariant {
        q: SymMatrixK::from_spectral(&u.frame, &q),
        tau_u: Some(tau_u),
        c,
    })
}

fn threshold_time(u: &BarU, c: f64) -> Result<f64> {
    let f = |l: &[f64]| lambda_min(l) + c;
    let f0 = f(&u.lambda_ref);
    if f0 == 0.0 {
        return Ok(u.tau_ref);
    }
    let forward = f0 > 0.0;
    let mut t = u.tau_ref;
    let mut y = u.lambda_ref.clone();
    let cstar = u.cstar;
    // march until the sign of f changes; [lo, hi] then brackets the crossing
    let (mut lo, mut hi, anchor) = 'search: {
        for _ in 0..MAX_CHUNKS {
            let t1 = if forward { t + CHUNK } else { t - CHUNK };
            let sol = ode::dopri5(
                |_, y, dy| eigen_rhs(y, cstar, dy),
                t,
                &y,
                t1,
                &opts(),
                Output::At(&[]),
                |_, y| if forward { f(y) <= 0.0 } else { f(y) >= 0.0 },
            )?;
            let (ta, ya) = sol.last();
            if sol.termination == Termination::Guard {
                let anchor = (ta, ya.to_vec());
                break 'search if forward { (ta, t1, anchor) } else { (t1, ta, anchor) };
            }
            if f(ya) == 0.0 {
                return Ok(ta);
            }
            t = ta;
            y = ya.to_vec();
        }
        return Err(Error::Quadratic(format!(
            "threshold -{c} not crossed within {} time units",
            MAX_CHUNKS as f64 * CHUNK
        )));
    };
    let anchor = BarU {
        frame: u.frame.clone(),
        tau_ref: anchor.0,
        lambda_ref: anchor.1,
        cstar,
    };
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let above = match anchor.lambdas_at(mid) {
            Ok(l) => f(&l) > 0.0,
            Err(Error::BlowUp { .. }) => false,
            Err(e) => return Err(e),
        };
        if above {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solution through `U(-2 log a) = -c a^{-1} Q'`, `a` the largest eigenvalue of `Q'`.
pub fn q_inverse(qp: &SymMatrixK, cstar: f64) -> Result<BarU> {
    let k = qp.k();
    let (frame, q) = spectral_reduce(qp);
    let q = snapped(q);
    if q.iter().any(|&x| x < 0.0) {
        return Err(Error::Quadratic(format!(
            "Q' must be non-negative definite, eigenvalues {q:?}"
        )));
    }
    let a = q[0];
    if a == 0.0 {
        return Ok(BarU::zero(k, cstar));
    }
    let c = taylor::threshold_c(cstar);
    Ok(BarU {
        frame,
        tau_ref: -2.0 * a.ln(),
        lambda_ref: q.iter().map(|x| -c * x / a).collect(),
        cstar,
    })
}

/// `1/lambda_i = log a_i + sqrt2 tau + C** log(-tau)` fitted per nonzero channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub a: SymMatrixK,
    /// Per-channel eigenvalues of `A`; zero channels report 0.
    pub a_eigen: Vec<f64>,
    /// Joint fit with a shared `C**`.
    pub cstarstar: f64,
    pub cstarstar_channels: Vec<Option<f64>>,
    /// Largest deviation `|lambda - model|` over the fitted samples.
    pub residual: f64,
    /// Slope of `log residual` against `log |tau|`, negated; `None` if not measurable.
    pub residual_exponent: Option<f64>,
}

fn lstsq(rows: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = rows.len();
    let n = rows[0].len();
    let a = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(rhs);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::Quadratic("degenerate asymptotic fit (rank deficient)".into()));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Quadratic(e.to_string()))?;
    Ok(x.iter().copied().collect())
}

fn model(log_a: f64, css: f64, tau: f64) -> f64 {
    1.0 / (log_a + SQRT_2 * tau + css * (-tau).ln())
}

/// Fits samples with `tau <= tau_max < 0`.
pub fn fit_asymptotics(traj: &SpectralTrajectory, tau_max: f64) -> Result<AsymptoticFit> {
    if !(tau_max < -1.0) {
        return Err(Error::Quadratic("fit window must lie at tau < -1".into()));
    }
    let idx: Vec<usize> = (0..traj.len()).filter(|&i| traj.tau[i] <= tau_max).collect();
    if idx.len() < 3 {
        return Err(Error::Quadratic("too few samples in fit window".into()));
    }
    let k = traj.frame.nrows();
    let live: Vec<usize> = (0..k).filter(|&c| idx.iter().all(|&i| traj.lambdas[i][c] < 0.0)).collect();
    if live.is_empty() {
        return Err(Error::Quadratic("no nonzero eigen-channel to fit".into()));
    }
    let mut channels = vec![None; k];
    let mut log_a = vec![0.0; k];
    for &c in &live {
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| vec![1.0, (-traj.tau[i]).ln()]).collect();
        let rhs: Vec<f64> = idx
            .iter()
            .map(|&i| 1.0 / traj.lambdas[i][c] - SQRT_2 * traj.tau[i])
            .collect();
        let p = lstsq(&rows, &rhs)?;
        channels[c] = Some(p[1]);
        log_a[c] = p[0];
    }
    // joint fit: intercept per channel, shared C**
    let nl = live.len();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (slot, &c) in live.iter().enumerate() {
        for &i in &idx {
            let mut r = vec![0.0; nl + 1];
            r[slot] = 1.0;
            r[nl] = (-traj.tau[i]).ln();
            rows.push(r);
            rhs.push(1.0 / traj.lambdas[i][c] - SQRT_2 * traj.tau[i]);
        }
    }
    let p = lstsq(&rows, &rhs)?;
    let css = p[nl];
    let mut a_eig = vec![0.0; k];
    for (slot, &c) in live.iter().enumerate() {
        a_eig[c] = p[slot].exp();
        log_a[c] = p[slot];
    }
    let res: Vec<(f64, f64)> = idx
        .iter()
        .map(|&i| {
            let t = traj.tau[i];
            let r = live
                .iter()
                .map(|&c| (traj.lambdas[i][c] - model(log_a[c], css, t)).abs())
                .fold(0.0, f64::max);
            (t, r)
        })
        .collect();
    let residual = res.iter().map(|r| r.1).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = res
        .iter()
        .filter(|r| r.1 > 1e-15 * (1.0 / r.0.abs()))
        .map(|&(t, r)| ((-t).ln(), r.ln()))
        .collect();
    let residual_exponent = if pts.len() >= 3 {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        (sxx > 0.0).then(|| -sxy / sxx)
    } else {
        None
    };
    Ok(AsymptoticFit {
        a: SymMatrixK::from_spectral(&traj.frame, &a_eig),
        a_eigen: a_eig,
        cstarstar: css,
        cstarstar_channels: channels,
        residual,
        residual_exponent,
    })
}

/// `-(2 rank + C*)/sqrt2`, the `log(-tau)` coefficient for equal nonzero eigenvalues.
pub fn cstarstar_closed_form(rank: usize, cstar: f64) -> f64 {
    -(2.0 * rank as f64 + cstar) / SQRT_2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct QReport {
    #[serde(rename = "k")]
    pub k: usize,
    #[serde(rename = "c")]
    pub c: f64,
    pub cstar: f64,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "tau_U")]
    pub tau_u: Option<f64>,
    #[serde(rename = "A")]
    pub a: Option<Vec<Vec<f64>>>,
    pub cstarstar: Option<f64>,
    #[serde(rename = "residuals")]
    pub residuals: Option<(f64, Option<f64>)>,
}

impl QReport {
    pub fn new(qi: &QInvariant, cstar: f64, fit: Option<&AsymptoticFit>) -> Self {
        QReport {
            k: qi.q.k(),
            c: qi.c,
            cstar,
            q: qi.q.to_rows(),
            tau_u: qi.tau_u,
            a: fit.map(|f| f.a.to_rows()),
            cstarstar: fit.map(|f| f.cstarstar),
            residuals: fit.map(|f| (f.residual, f.residual_exponent)),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_solution() {
        let z = BarU::zero(2, 6.0);
        let q = q_invariant(&z).unwrap();
        assert!(q.q.is_zero());
        assert_eq!(q.tau_u, None);
        let tr = z.integrate(10.0, Output::Steps).unwrap();
        assert!(tr.lambdas.iter().all(|l| l.iter().all(|&x| x == 0.0)));
        assert!(q_inverse(&SymMatrixK::zeros(2), 6.0).unwrap().is_zero());
    }

    #[test]
    fn rejects_positive() {
        let u = SymMatrixK::from_diagonal(&[0.1, -0.2]);
        assert!(BarU::new(&u, 0.0, 6.0).is_err());
    }

    #[test]
    fn inverse_round_trip_scalar() {
        let qp = SymMatrixK::from_diagonal(&[0.7]);
        let h = q_inverse(&qp, 6.0).unwrap();
        let q = q_invariant(&h).unwrap();
        assert!((q.q.get(0, 0) - 0.7).abs() < 1e-12);
        // re-anchored far in the past
        let h2 = h.rebase(h.tau_ref - 300.0).unwrap();
        let q2 = q_invariant(&h2).unwrap();
        assert!((q2.q.get(0, 0) - 0.7).abs() < 1e-7 * 0.7, "{:?}", q2);
    }

    #[test]
    fn closed_form_cstarstar() {
        assert!((cstarstar_closed_form(1, 6.0) + 8.0 / SQRT_2).abs() < 1e-15);
    }
}
