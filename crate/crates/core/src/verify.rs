//! Self-check suites behind `cylflow verify`.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{self, Dimensions, ModeVector, MultiIndex, QuadratureRule};
use crate::linear_mode::{self, LinearAsymptotics};
use crate::ode::Output;
use crate::pde::{self, Scheme, SolverConfig};
use crate::quadratic_mode::{self, BarU};
use crate::scenario::{self, OutputSpec, Scenario, SeedMode, SeedSpec, TauSpan};
use crate::symmetric::SymMatrixK;
use crate::taylor::{self, ConstantsFile, DerivedConstants, LeadingModes};
use crate::tracker::{self, Phase, RadiusPolicy, TrackRecord, TrackerConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Hermite,
    Taylor,
    Constants,
    MatrixOde,
    QInvariant,
    Linear,
    Pde,
    Tracker,
    Determinism,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 10] = [
        "hermite",
        "taylor",
        "constants",
        "matrix-ode",
        "q-invariant",
        "linear",
        "pde",
        "tracker",
        "determinism",
        "all",
    ];
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hermite" => Suite::Hermite,
            "taylor" => Suite::Taylor,
            "constants" => Suite::Constants,
            "matrix-ode" => Suite::MatrixOde,
            "q-invariant" => Suite::QInvariant,
            "linear" => Suite::Linear,
            "pde" => Suite::Pde,
            "tracker" => Suite::Tracker,
            "determinism" => Suite::Determinism,
            "all" => Suite::All,
            _ => {
                return Err(Error::Config(format!(
                    "unknown suite '{s}', expected one of {}",
                    Suite::NAMES.join(", ")
                )))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(id: &str, passed: bool, detail: String) -> Self {
        Check {
            id: id.to_string(),
            passed,
            detail,
        }
    }

    fn from_result(id: &str, r: Result<Check>) -> Check {
        r.unwrap_or_else(|e| Check::new(id, false, format!("error: {e}")))
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.detail
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub rng_seed: u64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run_suite(suite: Suite, rng_seed: u64) -> SuiteReport {
    let mut checks = Vec::new();
    let want = |s: Suite| suite == s || suite == Suite::All;
    if want(Suite::Hermite) {
        checks.extend(hermite_checks());
    }
    if want(Suite::Taylor) {
        checks.extend(taylor_checks(rng_seed));
    }
    if want(Suite::Constants) {
        checks.extend(constants_checks());
    }
    if want(Suite::MatrixOde) {
        checks.push(Check::from_result("matrix-ode.asymptotic-law", matrix_ode_law()));
    }
    if want(Suite::QInvariant) {
        checks.extend(q_invariant_checks(rng_seed));
    }
    if want(Suite::Linear) {
        checks.extend(linear_checks(rng_seed));
    }
    if want(Suite::Pde) {
        checks.push(Check::from_result("pde.quadratic-law", quadratic_law()));
        checks.extend(rate_checks());
    }
    if want(Suite::Tracker) {
        checks.push(Check::from_result("tracker.odi-residual", odi_residual()));
        checks.push(Check::from_result("tracker.u0-vs-baru", u0_vs_bar_u()));
    }
    if want(Suite::Determinism) {
        checks.push(Check::from_result("determinism.manifests", determinism()));
    }
    SuiteReport {
        suite,
        rng_seed,
        checks,
    }
}

fn hermite_checks() -> Vec<Check> {
    let mut out = Vec::new();
    out.push(Check::from_result("hermite.gram", (|| {
        let mut worst = 0.0f64;
        for k in 1..=3 {
            let rule = QuadratureRule::new(k, hermite::DEFAULT_ORDER)?;
            worst = worst.max(hermite::gram_error(k, 8, &rule));
        }
        Ok(Check::new("hermite.gram", worst < 1e-10, format!("max Gram error {worst:.3e} (k <= 3, degree <= 8)")))
    })()));
    out.push(Check::from_result("hermite.product-p1p1", (|| {
        let mut worst = 0.0f64;
        for k in 1..=3 {
            for i in 0..k {
                for j in 0..k {
                    let got = hermite::product_expand(&MultiIndex::unit(k, i), &MultiIndex::unit(k, j), 8)?;
                    let mut want = ModeVector::zero(k, 16);
                    if i == j {
                        want.set(MultiIndex::pair(k, i, i), SQRT_2);
                        want.set(MultiIndex::zero(k), 1.0);
                    } else {
                        want.set(MultiIndex::pair(k, i, j), 1.0);
                    }
                    worst = worst.max(got.axpy(-1.0, &want).max_abs());
                }
            }
        }
        Ok(Check::new("hermite.product-p1p1", worst < 1e-12, format!("max coefficient error {worst:.3e}")))
    })()));
    out.push(Check::from_result("hermite.triple-p2", (|| {
        let rule = QuadratureRule::new(1, hermite::DEFAULT_ORDER)?;
        let h2 = |x: &[f64]| hermite::hermite_1d(2, x[0]);
        let v = hermite::inner(|x| h2(x) * h2(x), h2, &rule)?;
        let err = (v - 2.0 * SQRT_2).abs();
        Ok(Check::new("hermite.triple-p2", err < 1e-8, format!("<p2^2, p2> = {v:.15} (error {err:.2e})")))
    })()));
    out
}

fn random_leading(rng: &mut ChaCha8Rng, k: usize, amp: f64) -> LeadingModes {
    let mut u = LeadingModes::zero(k);
    u.a = rng.random_range(-amp..=amp);
    for b in u.b.iter_mut() {
        *b = rng.random_range(-amp..=amp);
    }
    for i in 0..k {
        for j in i..k {
            u.c.set(i, j, rng.random_range(-amp..=amp));
        }
    }
    u
}

fn taylor_checks(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    out.push(Check::from_result("taylor.q2-oracle", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let rules: Vec<QuadratureRule> = (1..=3).map(|k| QuadratureRule::new(k, 12)).collect::<Result<_>>()?;
        for t in 0..100 {
            let k = 1 + t % 3;
            let u = random_leading(&mut rng, k, 0.3);
            let modes = u.to_modes(2);
            let proj = hermite::project(|x| taylor::q2_pointwise(modes.eval(x)), 2, &rules[k - 1])?;
            let want = LeadingModes::from_modes(&proj);
            let got = taylor::q2_leading(&u);
            let err = linear_mode::leading_distance(&got, &want) / want.norm().max(1e-300);
            worst = worst.max(err);
        }
        Ok(Check::new("taylor.q2-oracle", worst <= 1e-8, format!("max relative error {worst:.3e} over 100 inputs")))
    })()));
    out.push(Check::from_result("taylor.q2-diag-odd", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let mut worst = 0.0f64;
        for k in 1..=3 {
            let rule = QuadratureRule::new(k, 12)?;
            for _ in 0..10 {
                let d: Vec<f64> = (0..k).map(|_| rng.random_range(-0.3..=0.3)).collect();
                let u = LeadingModes {
                    a: 0.0,
                    b: vec![0.0; k],
                    c: SymMatrixK::from_diagonal(&d),
                }
                .to_modes(2);
                let proj = hermite::project(|x| taylor::q2_pointwise(u.eval(x)), 4, &rule)?;
                let odd = proj.filter(|m| m.degree() == 1 || m.degree() == 3);
                worst = worst.max(odd.max_abs());
            }
        }
        Ok(Check::new("taylor.q2-diag-odd", worst < 1e-10, format!("max degree-1/3 projection {worst:.3e}")))
    })()));
    out
}

/// Residuals `max_i |q3_v0_project - <N(U_eps), p2_ii>|` for the full nonlinearity `N` and
/// `U_eps = eps^2 a + eps sum c_i p2_ii` (the constant mode is slaved at second order).
pub fn q3_richardson(dims: &Dimensions, a: f64, c: &[f64], eps: &[f64], order: usize) -> Result<Vec<f64>> {
    let k = dims.k();
    let rule = QuadratureRule::new(k, order)?;
    let consts = DerivedConstants::derive(dims)?;
    let zero_v = SymMatrixK::zeros(k);
    let zero_w = vec![0.0; k];
    let mut out = Vec::new();
    for &e in eps {
        let u = LeadingModes {
            a: e * e * a,
            b: vec![0.0; k],
            c: SymMatrixK::from_diagonal(&c.iter().map(|x| e * x).collect::<Vec<_>>()),
        };
        let formula = taylor::q3_v0_project(u.a, &u.c, &zero_v, &zero_w, &consts)?;
        let mut worst = 0.0f64;
        for (i, f) in formula.iter().enumerate() {
            let want = hermite::inner(
                |x| pde::nonlinear_term(dims, &u.jet(x)),
                |x| hermite::hermite_1d(2, x[i]),
                &rule,
            )?;
            worst = worst.max((f - want).abs());
        }
        out.push(worst);
    }
    Ok(out)
}

/// Successive `log2` ratios of a residual sequence at halving amplitudes.
pub fn slopes(res: &[f64]) -> Vec<f64> {
    res.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn constants_checks() -> Vec<Check> {
    let mut out = Vec::new();
    out.push(Check::from_result("constants.stored", (|| {
        let fresh = taylor::generate_constants(hermite::DEFAULT_ORDER)?;
        let stored = ConstantsFile::stored()?;
        let same = fresh.to_toml() == stored.to_toml();
        Ok(Check::new("constants.stored", same, format!("regenerated checksum {} vs stored {}", fresh.checksum, stored.checksum)))
    })()));
    out.push(Check::from_result("constants.order-stability", (|| {
        let mut worst = 0.0f64;
        for m in taylor::TABLE_SPHERE_DIMS {
            for k in 1..=2 {
                let dims = Dimensions::new(m + k, k)?;
                let a = taylor::derive_constants_with(&dims, 20)?;
                let b = taylor::derive_constants_with(&dims, 24)?;
                worst = worst
                    .max((a.c1 - b.c1).abs())
                    .max((a.c2 - b.c2).abs())
                    .max((a.cstar - b.cstar).abs());
            }
        }
        Ok(Check::new("constants.order-stability", worst <= 1e-6, format!("max change {worst:.3e} between orders 20 and 24")))
    })()));
    out.push(Check::from_result("constants.q3-richardson", (|| {
        let eps = [0.02, 0.01, 0.005, 0.0025];
        let mut min_slope = f64::INFINITY;
        let mut detail = Vec::new();
        for (n, k, c) in [(2, 1, vec![0.8]), (4, 2, vec![0.8, 0.5])] {
            let dims = Dimensions::new(n, k)?;
            let r = q3_richardson(&dims, 0.3, &c, &eps, 48)?;
            let s = slopes(&r);
            min_slope = s.iter().copied().fold(min_slope, f64::min);
            detail.push(format!("(n={n},k={k}) slopes {s:.3?}"));
        }
        Ok(Check::new("constants.q3-richardson", min_slope >= 3.8, detail.join("; ")))
    })()));
    out
}

pub fn matrix_ode_law() -> Result<Check> {
    let consts = DerivedConstants::derive(&Dimensions::new(2, 1)?)?;
    let tau0 = -1e6;
    let u0 = SymMatrixK::from_diagonal(&[1.0 / (SQRT_2 * tau0)]);
    let tr = quadratic_mode::integrate_bar_u(&u0, tau0, -1e2, consts.cstar, Output::Steps)?;
    let worst = tr
        .tau
        .iter()
        .zip(&tr.lambdas)
        .filter(|(t, _)| **t <= -1e3)
        .map(|(t, l)| (t * l[0] - FRAC_1_SQRT_2).abs())
        .fold(0.0, f64::max);
    Ok(Check::new(
        "matrix-ode.asymptotic-law",
        worst <= 0.05 && tr.blowup.is_none(),
        format!("max |tau lambda - 1/sqrt2| = {worst:.4} on tau <= -1e3 ({} steps)", tr.len()),
    ))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..=1.0));
    let qr = m.qr();
    qr.q()
}

fn random_psd(rng: &mut ChaCha8Rng, k: usize, rank: usize) -> SymMatrixK {
    let s = random_orthogonal(rng, k);
    let mut d: Vec<f64> = (0..k).map(|i| if i < rank { rng.random_range(0.05..=1.0) } else { 0.0 }).collect();
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in d.iter_mut() {
        *x /= norm.max(1.0);
    }
    SymMatrixK::from_spectral(&s, &d)
}

fn rel(a: &SymMatrixK, b: &SymMatrixK) -> f64 {
    a.sub(b).frobenius() / b.frobenius().max(1e-300)
}

fn q_invariant_checks(seed: u64) -> Vec<Check> {
    let cstar = match DerivedConstants::derive(&Dimensions::new(3, 1).unwrap()) {
        Ok(c) => c.cstar,
        Err(e) => return vec![Check::new("q-invariant", false, e.to_string())],
    };
    let mut out = Vec::new();
    out.push(Check::from_result("q-invariant.round-trip", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for t in 0..50 {
            let k = 1 + t % 2;
            let qp = random_psd(&mut rng, k, k);
            let h = quadratic_mode::q_inverse(&qp, cstar)?;
            let h = h.rebase(h.tau_ref - 40.0)?;
            let q = quadratic_mode::q_invariant(&h)?;
            worst = worst.max(rel(&q.q, &qp));
        }
        Ok(Check::new("q-invariant.round-trip", worst <= 1e-4, format!("max relative error {worst:.3e} over 50 inputs")))
    })()));
    let shift = |id: &'static str, power: f64| {
        Check::from_result(id, (|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
            let qp = random_psd(&mut rng, 2, 2);
            let h = quadratic_mode::q_inverse(&qp, cstar)?.rebase(-20.0)?;
            let q0 = quadratic_mode::q_invariant(&h)?.q;
            let mut worst = 0.0f64;
            for lam in [0.5f64, 2.0, 10.0] {
                let q1 = quadratic_mode::q_invariant(&h.time_shifted(2.0 * lam.ln()))?.q;
                worst = worst.max(rel(&q1, &q0.scale(lam.powf(power))));
            }
            Ok(Check::new(id, worst <= 1e-6, format!("max relative error {worst:.3e} against lambda^{power} Q")))
        })())
    };
    out.push(shift("q-invariant.time-shift", 1.0));
    out.push(shift("q-invariant.time-shift-inverse", -1.0));
    out.push(Check::from_result("q-invariant.equivariance", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let qp = random_psd(&mut rng, 2, 2);
            let s = random_orthogonal(&mut rng, 2);
            let h = quadratic_mode::q_inverse(&qp, cstar)?.rebase(-30.0)?;
            let q = quadratic_mode::q_invariant(&h)?.q;
            let qs = quadratic_mode::q_invariant(&h.conjugated(&s)?)?.q;
            worst = worst.max(qs.sub(&q.conjugate(&s)).frobenius());
        }
        Ok(Check::new("q-invariant.equivariance", worst <= 1e-8, format!("max |Q(S^T U S) - S^T Q S| = {worst:.3e}")))
    })()));
    out.push(Check::from_result("q-invariant.nullspace", (|| {
        let qp = SymMatrixK::from_diagonal(&[0.6, 0.0]);
        let h = quadratic_mode::q_inverse(&qp, cstar)?.rebase(-30.0)?;
        let tr = h.integrate(h.tau_ref + 25.0, Output::Steps)?;
        let zero_channel = tr.lambdas.iter().all(|l| l[1] == 0.0);
        let q = quadratic_mode::q_invariant(&h)?.q;
        let structural = q.get(0, 1) == 0.0 && q.get(1, 1) == 0.0;
        Ok(Check::new(
            "q-invariant.nullspace",
            zero_channel && structural,
            format!("zero channel exact: {zero_channel}, Q nullspace entries exact: {structural}"),
        ))
    })()));
    out
}

fn linear_checks(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    out.push(Check::from_result("linear.round-trip", (|| {
        let mut worst = 0.0f64;
        for (a, b) in [(0.3, vec![0.2]), (-0.1, vec![0.0])] {
            let asym = LinearAsymptotics::new(a, b);
            let u0 = asym.ansatz(-40.0);
            let traj = linear_mode::integrate_leading(&u0, (-40.0, -10.0), 0.1)?;
            let r = linear_mode::extract_asymptotics(&traj, (-20.0, -10.0))?;
            worst = worst.max((r.a_bar - asym.a_bar).abs());
            for (x, y) in r.b_bar.iter().zip(&asym.b_bar) {
                worst = worst.max((x - y).abs());
            }
        }
        Ok(Check::new("linear.round-trip", worst <= 1e-3, format!("max parameter error {worst:.3e}")))
    })()));
    out.push(Check::from_result("linear.transform-laws", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let k = rng.random_range(1..=3usize);
            let asym = LinearAsymptotics::new(
                rng.random_range(-1.0..=1.0),
                (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect(),
            );
            let alpha: f64 = rng.random_range(0.2..=5.0);
            let p: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..=2.0)).collect();
            let dt: f64 = rng.random_range(-3.0..=3.0);
            let got = linear_mode::transform_asymptotics(&asym, alpha, &p, dt)?;
            let bsq = asym.b_sq();
            let shifted = asym.a_bar - asym.b_bar.iter().zip(&p).map(|(b, q)| b * q).sum::<f64>() / SQRT_2 + 0.5 * dt;
            let a_want = alpha * alpha * shifted - bsq * alpha * alpha * alpha.ln();
            worst = worst.max((got.a_bar - a_want).abs() / a_want.abs().max(1.0));
            for (x, y) in got.b_bar.iter().zip(&asym.b_bar) {
                worst = worst.max((x - alpha * y).abs());
            }
        }
        Ok(Check::new("linear.transform-laws", worst <= 1e-12, format!("max deviation from the closed laws {worst:.3e}")))
    })()));
    out.push(Check::from_result("linear.bowl", (|| {
        let mut ok = linear_mode::bowl_constant() == FRAC_1_SQRT_2;
        for d in [1.0, -1.0, 5.0, -5.0] {
            ok &= linear_mode::bowl_fixed_point(linear_mode::bowl_constant(), 0.25, d, 2)?;
            ok &= !linear_mode::bowl_fixed_point(0.7, 0.25, d, 2)?;
        }
        Ok(Check::new("linear.bowl", ok, "fixed point exact at b_k = 1/sqrt2, broken at 0.7".into()))
    })()));
    out
}

/// Solver and tracker set-up shared by the PDE criteria (`n = 2`, `k = 1`, `R_dom = 12`).
pub fn pde_scenario(name: &str, index: usize, amplitude: f64, tau_end: f64, h: f64, dt: f64) -> Scenario {
    Scenario {
        name: name.to_string(),
        dims: Dimensions::new(2, 1).unwrap(),
        solver: SolverConfig::new(h, dt, 12.0, Scheme::Imex),
        tracker: TrackerConfig {
            radius: RadiusPolicy::Fixed { r: 8.0 },
            ..Default::default()
        },
        seed: SeedSpec {
            modes: vec![SeedMode {
                index: vec![index],
                amplitude,
            }],
            cutoff_radius: Some(8.0),
            ..Default::default()
        },
        tau: TauSpan { start: 0.0, end: tau_end },
        observe_every: ((0.1 / dt).round() as usize).max(1),
        output: OutputSpec {
            dir: PathBuf::from(name),
            snapshot: false,
        },
        rng_seed: 0,
    }
}

/// Sample-wise `|d c / d tau + sqrt2 c^2| / c^2` on records with `tau >= after`.
pub fn sqrt2_law_ratios(recs: &[TrackRecord], after: f64) -> Vec<f64> {
    let c = |r: &TrackRecord| r.leading().c.get(0, 0);
    let mut out = Vec::new();
    for i in 1..recs.len().saturating_sub(1) {
        if recs[i].tau < after {
            continue;
        }
        let w = tracker::central_weights(recs[i - 1].tau, recs[i].tau, recs[i + 1].tau);
        let d = w[0] * c(&recs[i - 1]) + w[1] * c(&recs[i]) + w[2] * c(&recs[i + 1]);
        let ci = c(&recs[i]);
        out.push((d + SQRT_2 * ci * ci).abs() / (ci * ci));
    }
    out
}

/// The run the quadratic-law, ODI-residual and cross-check criteria are stated on.
pub fn run6(h: f64, dt: f64) -> Result<scenario::RunOutput> {
    scenario::execute(&pde_scenario("run6", 2, -0.05, 40.0, h, dt))
}

fn run6_complete(h: f64, dt: f64) -> Result<scenario::RunOutput> {
    let out = run6(h, dt)?;
    if let Some(t) = &out.report.termination {
        return Err(Error::Pde(format!("run 6 (h = {h}, dt = {dt}) ended early: {t}")));
    }
    Ok(out)
}

pub fn quadratic_law() -> Result<Check> {
    let out = run6(0.05, 0.01)?;
    let ratios = sqrt2_law_ratios(&out.tracker.records, 5.0);
    let ok = ratios.iter().filter(|&&r| r <= 0.2).count();
    let frac = if ratios.is_empty() { 0.0 } else { ok as f64 / ratios.len() as f64 };
    let term = out.report.termination.clone().unwrap_or_else(|| "completed".into());
    Ok(Check::new(
        "pde.quadratic-law",
        out.report.termination.is_none() && !ratios.is_empty() && frac >= 0.95,
        format!("{} of {} samples after tau = 5 within xi = 0.2 ({term})", ok, ratios.len()),
    ))
}

/// Least-squares slope of `ln y` against `tau`.
pub fn log_slope(tau: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = tau.iter().zip(y).filter(|p| *p.1 > 0.0).map(|(t, v)| (*t, v.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

fn rate_checks() -> Vec<Check> {
    let mut out = Vec::new();
    for (id, index, tau_end, rate, phase) in [
        ("pde.constant-rate", 0usize, 2.0, 1.0, Phase::Constant),
        ("pde.linear-rate", 1usize, 3.0, 0.5, Phase::Linear),
    ] {
        out.push(Check::from_result(id, (|| {
            let run = scenario::execute(&pde_scenario(id, index, 0.01, tau_end, 0.05, 0.01))?;
            let recs = &run.tracker.records;
            let tau: Vec<f64> = recs.iter().map(|r| r.tau).collect();
            let y: Vec<f64> = recs.iter().map(|r| if index == 0 { r.u1_norm } else { r.u12_norm }).collect();
            let fitted = log_slope(&tau, &y);
            let single = run.report.phases.single_phase();
            let ok = run.report.termination.is_none() && (fitted / rate - 1.0).abs() <= 0.05 && single == Some(phase);
            Ok(Check::new(id, ok, format!("fitted rate {fitted:.4} (target {rate}), phase {single:?}")))
        })()));
    }
    out
}

/// Smallest `C` with `residual <= C (||U++||^4 + U-)` along a track.
pub fn odi_constant(recs: &[TrackRecord]) -> f64 {
    recs.iter()
        .filter_map(|r| r.residual_plus.map(|res| res / (r.upp_norm.powi(4) + r.uminus)))
        .fold(0.0, f64::max)
}

pub fn odi_residual() -> Result<Check> {
    let base = odi_constant(&run6_complete(0.05, 0.01)?.tracker.records);
    let half_dt = odi_constant(&run6_complete(0.05, 0.005)?.tracker.records);
    let half_h = odi_constant(&run6_complete(0.025, 0.01)?.tracker.records);
    let spread = [half_dt / base, half_h / base];
    let ok = spread.iter().all(|r| (0.5..=1.5).contains(r));
    Ok(Check::new(
        "tracker.odi-residual",
        ok,
        format!("C = {base:.4e}; ratios under halving dt, h: {spread:.3?}"),
    ))
}

/// Least-squares slope of `ln |d|` against `ln (tau_end - tau + 10)`, negated.
pub fn decay_exponent(tau: &[f64], d: &[f64], tau_end: f64) -> f64 {
    let x: Vec<f64> = tau.iter().map(|t| (tau_end - t + 10.0).ln()).collect();
    let pts: Vec<(f64, f64)> = x.iter().zip(d).filter(|p| *p.1 > 0.0).map(|(a, b)| (*a, b.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    -sxy / sxx
}

pub fn u0_vs_bar_u() -> Result<Check> {
    let run = run6_complete(0.05, 0.01)?;
    let recs = &run.tracker.records;
    let last = recs.last().ok_or_else(|| Error::Tracker("empty track".into()))?;
    let cstar = DerivedConstants::derive(&Dimensions::new(2, 1)?)?.cstar;
    let h = BarU::new(&last.leading().c, last.tau, cstar)?;
    let taus: Vec<f64> = recs.iter().rev().map(|r| r.tau).collect();
    let tr = h.integrate(recs[0].tau, Output::At(&taus))?;
    let d: Vec<f64> = recs
        .iter()
        .rev()
        .zip(&tr.lambdas)
        .map(|(r, l)| (r.leading().c.get(0, 0) - l[0]).abs())
        .collect();
    let e = decay_exponent(&taus, &d, last.tau);
    Ok(Check::new("tracker.u0-vs-baru", e >= 2.5, format!("decay exponent {e:.3}")))
}

/// Runs a small scenario twice into the same fresh directory and compares manifests.
pub fn determinism() -> Result<Check> {
    let base = std::env::temp_dir().join(format!("cylflow-determinism-{}", std::process::id()));
    let mut manifests = Vec::new();
    for _ in 0..2 {
        let mut s = pde_scenario("determinism", 2, 0.02, 1.0, 0.1, 0.02);
        s.seed.noise = Some(scenario::SeedNoise {
            amplitude: 1e-3,
            max_degree: 4,
        });
        s.rng_seed = 11;
        s.output.dir = base.clone();
        scenario::run(&s)?;
        manifests.push(std::fs::read(s.output.dir.join("manifest.json"))?);
        std::fs::remove_dir_all(&base)?;
    }
    let same = manifests[0] == manifests[1];
    Ok(Check::new(
        "determinism.manifests",
        same,
        format!("manifest sha256 {}", scenario::sha256_hex(&manifests[0])),
    ))
}
