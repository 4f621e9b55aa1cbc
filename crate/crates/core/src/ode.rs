//! Dormand-Prince 5(4) integrator with step-size control and dense output.
//! Works in either time direction.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed |step|.
    pub h_max: f64,
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-14,
            h_max: f64::INFINITY,
            h_init: None,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Completed,
    /// The guard predicate rejected the state; `t` of the last accepted state is reported.
    Guard,
}

#[derive(Clone, Debug)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub termination: Termination,
    pub steps: usize,
    pub rejected: usize,
}

impl OdeSolution {
    pub fn last(&self) -> (f64, &[f64]) {
        (*self.t.last().unwrap(), self.y.last().unwrap())
    }
}

/// Output selection: every accepted step, or dense output at the given times
/// (which must be monotone in the integration direction; `t1` is always recorded).
pub enum Output<'a> {
    Steps,
    At(&'a [f64]),
}

fn stage(y: &[f64], h: f64, ks: &[(&[f64], f64)], out: &mut [f64]) {
    for i in 0..y.len() {
        let mut s = 0.0;
        for (k, a) in ks {
            s += a * k[i];
        }
        out[i] = y[i] + h * s;
    }
}

fn err_norm(y: &[f64], y1: &[f64], e: &[f64], opts: &OdeOptions) -> f64 {
    let mut s = 0.0;
    for i in 0..y.len() {
        let sc = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
        s += (e[i] / sc).powi(2);
    }
    (s / y.len().max(1) as f64).sqrt()
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`. `guard(t, y)` returning true stops
/// the integration before that state is accepted.
pub fn dopri5<F, G>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: &OdeOptions,
    output: Output<'_>,
    mut guard: G,
) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: FnMut(f64, &[f64]) -> bool,
{
    let n = y0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut sol = OdeSolution {
        t: vec![t0],
        y: vec![y0.to_vec()],
        termination: Termination::Completed,
        steps: 0,
        rejected: 0,
    };
    let (dense_times, mut next_out) = match output {
        Output::Steps => (None, 0usize),
        Output::At(ts) => {
            let skip = ts.iter().take_while(|&&t| (t - t0) * dir <= 0.0).count();
            (Some(ts), skip)
        }
    };
    if t1 == t0 || n == 0 {
        return Ok(sol);
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ys = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut e = vec![0.0; n];
    f(t, &y, &mut k1);
    let span = (t1 - t0).abs();
    let mut h = match opts.h_init {
        Some(h) => h.abs(),
        None => {
            let d0 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let d1 = k1.iter().map(|v| v * v).sum::<f64>().sqrt();
            if d0 < 1e-5 || d1 < 1e-5 {
                1e-6_f64.max(span * 1e-6)
            } else {
                0.01 * d0 / d1
            }
        }
    }
    .min(opts.h_max)
    .min(span);
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;
    loop {
        if sol.steps + sol.rejected >= opts.max_steps {
            return Err(Error::Ode(format!("step budget exhausted at t = {t}")));
        }
        let remaining = (t1 - t) * dir;
        let last = h >= remaining * (1.0 - 1e-13);
        if last {
            h = remaining;
        }
        let hs = h * dir;
        stage(&y, hs, &[(&k1, A21)], &mut ys);
        f(t + C2 * hs, &ys, &mut k2);
        stage(&y, hs, &[(&k1, A31), (&k2, A32)], &mut ys);
        f(t + C3 * hs, &ys, &mut k3);
        stage(&y, hs, &[(&k1, A41), (&k2, A42), (&k3, A43)], &mut ys);
        f(t + C4 * hs, &ys, &mut k4);
        stage(&y, hs, &[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)], &mut ys);
        f(t + C5 * hs, &ys, &mut k5);
        stage(&y, hs, &[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)], &mut ys);
        f(t + hs, &ys, &mut k6);
        stage(&y, hs, &[(&k1, A71), (&k3, A73), (&k4, A74), (&k5, A75), (&k6, A76)], &mut y1);
        let t_new = if last { t1 } else { t + hs };
        f(t_new, &y1, &mut k7);
        for i in 0..n {
            e[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err = err_norm(&y, &y1, &e, opts);
        if !err.is_finite() || y1.iter().any(|v| !v.is_finite()) {
            h *= 0.2;
            sol.rejected += 1;
            last_rejected = true;
            if h < 1e-14 * span.max(t.abs()).max(1.0) {
                return Err(Error::Ode(format!("non-finite state near t = {t}")));
            }
            continue;
        }
        // PI step-size control
        let fac11 = err.powf(0.2 - 0.04 * 0.75);
        let fac = (fac11 / fac_old.powf(0.04) / 0.9).clamp(0.1, 5.0);
        let h_new = h / fac;
        if err <= 1.0 {
            if guard(t_new, &y1) {
                sol.termination = Termination::Guard;
                if sol.t.last() != Some(&t) {
                    sol.t.push(t);
                    sol.y.push(y.clone());
                }
                return Ok(sol);
            }
            fac_old = err.max(1e-4);
            sol.steps += 1;
            if let Some(ts) = dense_times {
                let mut rc5 = vec![0.0; n];
                for i in 0..n {
                    rc5[i] = hs
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                while next_out < ts.len() && (ts[next_out] - t_new) * dir <= 0.0 {
                    let to = ts[next_out];
                    if to == t_new {
                        sol.y.push(y1.clone());
                    } else {
                        let theta = (to - t) / hs;
                        let th1 = 1.0 - theta;
                        sol.y.push(
                            (0..n)
                                .map(|i| {
                                    let r2 = y1[i] - y[i];
                                    let r3 = hs * k1[i] - r2;
                                    let r4 = r2 - hs * k7[i] - r3;
                                    y[i] + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * rc5[i])))
                                })
                                .collect(),
                        );
                    }
                    sol.t.push(to);
                    next_out += 1;
                }
                if last && sol.t.last() != Some(&t1) {
                    sol.t.push(t1);
                    sol.y.push(y1.clone());
                }
            } else {
                sol.t.push(t_new);
                sol.y.push(y1.clone());
            }
            t = t_new;
            y.copy_from_slice(&y1);
            std::mem::swap(&mut k1, &mut k7);
            if last {
                return Ok(sol);
            }
            h = if last_rejected { h_new.min(h) } else { h_new };
            h = h.min(opts.h_max);
            last_rejected = false;
        } else {
            h /= (fac11 / 0.9).min(10.0);
            sol.rejected += 1;
            last_rejected = true;
        }
    }
}

/// Fixed-step fifth-order Dormand-Prince, used for convergence-order checks.
pub fn dopri5_fixed<F>(mut f: F, t0: f64, y0: &[f64], t1: f64, steps: usize) -> Vec<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let h = (t1 - t0) / steps as f64;
    let mut y = y0.to_vec();
    let mut ks: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut ys = vec![0.0; n];
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        f(t, &y, &mut ks[0]);
        stage(&y, h, &[(&ks[0], A21)], &mut ys);
        f(t + C2 * h, &ys, &mut ks[1]);
        stage(&y, h, &[(&ks[0], A31), (&ks[1], A32)], &mut ys);
        f(t + C3 * h, &ys, &mut ks[2]);
        stage(&y, h, &[(&ks[0], A41), (&ks[1], A42), (&ks[2], A43)], &mut ys);
        f(t + C4 * h, &ys, &mut ks[3]);
        stage(&y, h, &[(&ks[0], A51), (&ks[1], A52), (&ks[2], A53), (&ks[3], A54)], &mut ys);
        f(t + C5 * h, &ys, &mut ks[4]);
        stage(
            &y,
            h,
            &[(&ks[0], A61), (&ks[1], A62), (&ks[2], A63), (&ks[3], A64), (&ks[4], A65)],
            &mut ys,
        );
        f(t + h, &ys, &mut ks[5]);
        let mut y1 = vec![0.0; n];
        stage(
            &y,
            h,
            &[(&ks[0], A71), (&ks[2], A73), (&ks[3], A74), (&ks[4], A75), (&ks[5], A76)],
            &mut y1,
        );
        y = y1;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_forward_and_backward() {
        let f = |_t: f64, y: &[f64], d: &mut [f64]| d[0] = -0.5 * y[0];
        let o = OdeOptions::default();
        let s = dopri5(f, 0.0, &[1.0], 10.0, &o, Output::Steps, |_, _| false).unwrap();
        assert!((s.last().1[0] - (-5.0f64).exp()).abs() < 1e-10);
        let s = dopri5(f, 10.0, &[(-5.0f64).exp()], 0.0, &o, Output::Steps, |_, _| false).unwrap();
        assert!((s.last().1[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dense_output_hits_requested_times() {
        let f = |_t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0];
        };
        let ts: Vec<f64> = (0..=40).map(|i| 0.25 * i as f64).collect();
        let o = OdeOptions {
            rtol: 1e-12,
            atol: 1e-14,
            ..Default::default()
        };
        let s = dopri5(f, 0.0, &[0.0, 1.0], 10.0, &o, Output::At(&ts), |_, _| false).unwrap();
        assert_eq!(s.t.len(), ts.len());
        for (t, y) in s.t.iter().zip(&s.y) {
            assert!((y[0] - t.sin()).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn fixed_step_order_five() {
        let f = |_t: f64, y: &[f64], d: &mut [f64]| d[0] = -y[0];
        let exact = (-1.0f64).exp();
        let e1 = (dopri5_fixed(f, 0.0, &[1.0], 1.0, 4)[0] - exact).abs();
        let e2 = (dopri5_fixed(f, 0.0, &[1.0], 1.0, 8)[0] - exact).abs();
        assert!((e1 / e2).log2() > 4.5, "{e1} {e2}");
    }
}
