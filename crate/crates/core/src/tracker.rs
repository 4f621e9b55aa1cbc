//! Localized mode tracking: cutoff, `U+` / `U-` projections, radius policies,
//! ODI residuals and the dominant-mode phase classifier.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::io::Write;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{self, Dimensions, ModeVector, MultiIndex, QuadratureRule};
use crate::pde::RadialGraphState;
use crate::taylor::{self, LeadingModes};

/// Cutoff profile: 1 on `(-inf, -0.2]`, 0 on `[-0.1, inf)`, quintic smoothstep between.
pub fn omega(s: f64) -> f64 {
    if s <= -0.2 {
        1.0
    } else if s >= -0.1 {
        0.0
    } else {
        let t = (s + 0.2) / 0.1;
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// `omega(|x| - R)`.
pub fn cutoff(x: &[f64], r: f64) -> f64 {
    omega(x.iter().map(|v| v * v).sum::<f64>().sqrt() - r)
}

/// `R = sqrt(J ln(1/||U++||))`; infinite when the norm vanishes.
pub fn radius_ancient(upp_norm: f64, j: usize) -> f64 {
    if upp_norm <= 0.0 {
        f64::INFINITY
    } else {
        (j as f64 * (1.0 / upp_norm).ln()).max(0.0).sqrt()
    }
}

/// `R = J sqrt(log(tau_tilde - tau + 10))`.
pub fn radius_quadratic(tau: f64, tau_tilde: f64, j: usize) -> f64 {
    j as f64 * (tau_tilde - tau + 10.0).ln().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RadiusPolicy {
    Ancient,
    Quadratic { tau_tilde: f64 },
    Fixed { r: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerConfig {
    pub lambda: f64,
    pub j: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    pub eta: f64,
    pub eps: f64,
    pub r_star: f64,
    pub radius: RadiusPolicy,
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default = "default_xi")]
    pub xi: f64,
    /// Gauss-Legendre points per grid cell in the localized projections.
    #[serde(default = "default_gl")]
    pub gl_points: usize,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn default_m() -> usize {
    4
}
fn default_c0() -> f64 {
    0.1
}
fn default_xi() -> f64 {
    0.2
}
fn default_gl() -> usize {
    4
}
fn default_cap() -> usize {
    hermite::DEFAULT_CAP
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            lambda: -1.5,
            j: 3,
            m: default_m(),
            eta: 0.1,
            eps: 0.1,
            r_star: 4.0,
            radius: RadiusPolicy::Ancient,
            c0: default_c0(),
            xi: default_xi(),
            gl_points: default_gl(),
            cap: default_cap(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let twice = 2.0 * self.lambda;
        if !(self.lambda < 0.0) || (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::Tracker(format!(
                "lambda must be a negative half-integer, got {}",
                self.lambda
            )));
        }
        if 2.0 - 2.0 * self.lambda - 1.0 > self.cap as f64 {
            return Err(Error::Tracker(format!(
                "degree cap {} cannot hold all modes above lambda = {}",
                self.cap, self.lambda
            )));
        }
        if !(self.eta > 0.0 && self.eta <= 0.1) {
            return Err(Error::Tracker(format!("eta must lie in (0, 1/10], got {}", self.eta)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Tracker(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if self.j < 1 {
            return Err(Error::Tracker("J must be at least 1".into()));
        }
        if !(self.r_star >= 1.0) {
            return Err(Error::Tracker("Rstar must be at least 1".into()));
        }
        if self.gl_points == 0 {
            return Err(Error::Tracker("gl_points must be positive".into()));
        }
        Ok(())
    }

    /// Highest degree with `L`-eigenvalue above `lambda`.
    pub fn top_degree(&self) -> usize {
        (1.0 - 2.0 * self.lambda).round() as usize
    }

    /// `eta exp(-((1 - eps) R)^2 / 8)`.
    pub fn floor(&self, r: f64) -> f64 {
        if r.is_infinite() {
            0.0
        } else {
            self.eta * (-((1.0 - self.eps) * r).powi(2) / 8.0).exp()
        }
    }
}

/// Quadrature nodes on the cutoff support with interpolation stencils into the grid.
struct LocalRule {
    /// Per node: point, Gaussian weight times quadrature weight, cutoff value,
    /// and (grid index, Lagrange weight) pairs.
    nodes: Vec<(Vec<f64>, f64, f64, Vec<(usize, f64)>)>,
}

fn cubic_stencil(coords_n: usize, h: f64, x0: f64, x: f64) -> [(usize, f64); 4] {
    let cell = (((x - x0) / h).floor() as isize).clamp(0, coords_n as isize - 2);
    let first = (cell - 1).clamp(0, coords_n as isize - 4) as usize;
    let nodes: Vec<f64> = (0..4).map(|a| x0 + (first + a) as f64 * h).collect();
    let mut out = [(0usize, 0.0); 4];
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (x - nodes[b]) / (nodes[a] - nodes[b]);
            }
        }
        out[a] = (first + a, w);
    }
    out
}

fn panels_1d(r: f64, x0: f64, h: f64, n: usize) -> Vec<(f64, f64)> {
    let hi = r - 0.1;
    let mut cuts: Vec<f64> = vec![-hi, -(r - 0.2), r - 0.2, hi];
    for i in 0..n {
        let x = x0 + i as f64 * h;
        if x > -hi && x < hi {
            cuts.push(x);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

impl LocalRule {
    fn new(state: &RadialGraphState, r: f64, gl_points: usize) -> Result<Self> {
        let g = &state.grid;
        if r > g.r_dom {
            return Err(Error::Tracker(format!(
                "cutoff radius {r} exceeds the grid radius {}",
                g.r_dom
            )));
        }
        let gl = GaussLegendre::new(NonZeroUsize::new(gl_points).unwrap());
        let x0 = -g.r_dom;
        let mut pts1: Vec<(f64, f64)> = Vec::new();
        for (a, b) in panels_1d(r, x0, g.h, g.n) {
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for (t, w) in gl.iter() {
                pts1.push((mid + half * t, half * w));
            }
        }
        let rho1 = |x: f64| (-x * x / 4.0).exp() / (4.0 * PI).sqrt();
        let st1: Vec<[(usize, f64); 4]> = pts1.iter().map(|p| cubic_stencil(g.n, g.h, x0, p.0)).collect();
        let mut nodes = Vec::new();
        if g.k == 1 {
            for (p, s) in pts1.iter().zip(&st1) {
                let om = cutoff(&[p.0], r);
                if om == 0.0 {
                    continue;
                }
                nodes.push((vec![p.0], p.1 * rho1(p.0), om, s.to_vec()));
            }
        } else {
            for (pa, sa) in pts1.iter().zip(&st1) {
                for (pb, sb) in pts1.iter().zip(&st1) {
                    let x = [pa.0, pb.0];
                    let om = cutoff(&x, r);
                    if om == 0.0 {
                        continue;
                    }
                    let mut st = Vec::with_capacity(16);
                    for &(ia, wa) in sa {
                        for &(ib, wb) in sb {
                            st.push((ia * g.n + ib, wa * wb));
                        }
                    }
                    nodes.push((x.to_vec(), pa.1 * pb.1 * rho1(pa.0) * rho1(pb.0), om, st));
                }
            }
        }
        Ok(LocalRule { nodes })
    }

    /// Projection of `u omega_R` onto all modes of degree `<= top`, and `||u omega_R||^2`.
    fn project(&self, state: &RadialGraphState, top: usize, cap: usize) -> (ModeVector, f64) {
        let k = state.grid.k;
        let modes: Vec<MultiIndex> = hermite::basis(k, top);
        let mut acc = vec![0.0; modes.len()];
        let mut norm_sq = 0.0;
        for (x, w, om, st) in &self.nodes {
            let u: f64 = st.iter().map(|&(i, a)| a * state.values[i]).sum();
            let v = u * om;
            norm_sq += w * v * v;
            if v == 0.0 {
                continue;
            }
            let tables: Vec<Vec<f64>> = x.iter().map(|&xi| hermite::hermite_1d_all(top, xi)).collect();
            for (a, m) in acc.iter_mut().zip(&modes) {
                let p: f64 = m.degrees().iter().enumerate().map(|(c, &d)| tables[c][d]).product();
                *a += w * v * p;
            }
        }
        let mut out = ModeVector::zero(k, cap);
        for (m, a) in modes.into_iter().zip(acc) {
            out.set(m, a);
        }
        (out, norm_sq)
    }
}

/// `U+ = P_{> lambda}(u omega_R)`.
pub fn u_plus(state: &RadialGraphState, r: f64, cfg: &TrackerConfig) -> Result<ModeVector> {
    let rule = LocalRule::new(state, r, cfg.gl_points)?;
    Ok(rule.project(state, cfg.top_degree(), cfg.cap).0)
}

/// `||P_{<= lambda}(u omega_R)|| + eta exp(-((1-eps)R)^2/8)`.
pub fn u_minus(state: &RadialGraphState, r: f64, cfg: &TrackerConfig) -> Result<f64> {
    let rule = LocalRule::new(state, r, cfg.gl_points)?;
    let (up, nsq) = rule.project(state, cfg.top_degree(), cfg.cap);
    Ok((nsq - up.norm_sq()).max(0.0).sqrt() + cfg.floor(r))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Quadratic,
    Linear,
    Constant,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Quadratic => "quadratic",
            Phase::Linear => "linear",
            Phase::Constant => "constant",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub tau: f64,
    pub r: f64,
    pub uplus: ModeVector,
    pub upp_norm: f64,
    pub uminus: f64,
    pub residual_plus: Option<f64>,
    pub phase: Option<Phase>,
    pub u0_min: f64,
    pub u0_max: f64,
    pub u0_norm: f64,
    pub u12_norm: f64,
    pub u1_norm: f64,
    /// Set when `J > 3` was truncated in the residual.
    pub truncated: bool,
}

impl TrackRecord {
    pub fn leading(&self) -> LeadingModes {
        LeadingModes::from_modes(&self.uplus)
    }

    fn is_zero(&self) -> bool {
        self.uplus.is_empty() || self.uplus.max_abs() == 0.0
    }
}

/// Stateful observer producing one record per state.
pub struct Tracker {
    pub dims: Dimensions,
    pub cfg: TrackerConfig,
    pub records: Vec<TrackRecord>,
    rule: QuadratureRule,
}

impl Tracker {
    pub fn new(dims: Dimensions, cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        let rule = QuadratureRule::new(dims.k(), hermite::DEFAULT_ORDER)?;
        Ok(Tracker {
            dims,
            cfg,
            records: Vec::new(),
            rule,
        })
    }

    fn clamp_radius(&self, r: f64, r_dom: f64) -> f64 {
        r.min(r_dom - 1.0).max(self.cfg.r_star)
    }

    /// Measures a state; the radius comes from the configured policy.
    pub fn measure(&self, state: &RadialGraphState) -> Result<TrackRecord> {
        let r_dom = state.grid.r_dom;
        if r_dom - 1.0 < self.cfg.r_star {
            return Err(Error::Tracker(format!(
                "grid radius {r_dom} leaves no room above Rstar = {}",
                self.cfg.r_star
            )));
        }
        let top = self.cfg.top_degree();
        let eval = |r: f64| -> Result<(ModeVector, f64)> {
            let rule = LocalRule::new(state, r, self.cfg.gl_points)?;
            Ok(rule.project(state, top, self.cfg.cap))
        };
        let (r, (up, nsq)) = match self.cfg.radius {
            RadiusPolicy::Fixed { r } => {
                let r = self.clamp_radius(r, r_dom);
                (r, eval(r)?)
            }
            RadiusPolicy::Quadratic { tau_tilde } => {
                let r = self.clamp_radius(radius_quadratic(state.tau, tau_tilde, self.cfg.j), r_dom);
                (r, eval(r)?)
            }
            RadiusPolicy::Ancient => {
                // R and ||U++(R)|| determine each other; iterate from the largest radius
                let mut r = self.clamp_radius(f64::INFINITY, r_dom);
                let mut cur = eval(r)?;
                for _ in 0..8 {
                    let upp = cur.0.filter(|m| m.degree() <= 2).norm();
                    let r_new = self.clamp_radius(radius_ancient(upp, self.cfg.j), r_dom);
                    if (r_new - r).abs() < 1e-9 {
                        break;
                    }
                    r = r_new;
                    cur = eval(r)?;
                }
                (r, cur)
            }
        };
        let lm = LeadingModes::from_modes(&up);
        let eig = lm.c.eigenvalues();
        let upp = up.filter(|m| m.degree() <= 2);
        Ok(TrackRecord {
            tau: state.tau,
            r,
            upp_norm: upp.norm(),
            uminus: (nsq - up.norm_sq()).max(0.0).sqrt() + self.cfg.floor(r),
            residual_plus: None,
            phase: None,
            u0_min: *eig.last().unwrap(),
            u0_max: eig[0],
            u0_norm: up.degree_part(2).norm(),
            u12_norm: up.degree_part(1).norm(),
            u1_norm: up.degree_part(0).norm(),
            truncated: false,
            uplus: up,
        })
    }

    pub fn observe(&mut self, state: &RadialGraphState) -> Result<()> {
        let rec = self.measure(state)?;
        self.records.push(rec);
        Ok(())
    }

    /// Fills in residuals and phases.
    pub fn finalize(&mut self) -> Result<PhaseReport> {
        let n = self.records.len();
        for i in 1..n.saturating_sub(1) {
            let (res, trunc) = residual_plus(
                &self.dims,
                &self.records[i - 1..=i + 1],
                &self.cfg,
                &self.rule,
            )?;
            self.records[i].residual_plus = Some(res);
            self.records[i].truncated = trunc;
        }
        let report = classify_phases(&self.records, self.cfg.c0, self.cfg.xi);
        for (r, p) in self.records.iter_mut().zip(&report.per_record) {
            r.phase = *p;
        }
        Ok(report)
    }
}

/// Three-point derivative at the middle of `(t0, t1, t2)`.
pub fn central_weights(t0: f64, t1: f64, t2: f64) -> [f64; 3] {
    let h1 = t1 - t0;
    let h2 = t2 - t1;
    [
        -h2 / (h1 * (h1 + h2)),
        (h2 - h1) / (h1 * h2),
        h1 / (h2 * (h1 + h2)),
    ]
}

/// `||d/dtau U+ - L U+ - Q_J+(U+)||` at the middle of three records.
pub fn residual_plus(
    dims: &Dimensions,
    recs: &[TrackRecord],
    cfg: &TrackerConfig,
    rule: &QuadratureRule,
) -> Result<(f64, bool)> {
    if recs.len() != 3 {
        return Err(Error::Tracker("residual needs three consecutive records".into()));
    }
    let w = central_weights(recs[0].tau, recs[1].tau, recs[2].tau);
    let du = recs[0]
        .uplus
        .scaled(w[0])
        .axpy(w[1], &recs[1].uplus)
        .axpy(w[2], &recs[2].uplus);
    let u = &recs[1].uplus;
    let (q, truncated) = taylor::q_taylor_plus(dims, u, cfg.j.min(3), cfg.lambda, rule)?;
    let res = du.axpy(-1.0, &hermite::apply_l(u)).axpy(-1.0, &q);
    Ok((res.norm(), truncated || cfg.j > 3))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseInterval {
    /// `None` marks an ambiguous stretch where no dominance test passes.
    pub phase: Option<Phase>,
    pub tau_start: f64,
    pub tau_end: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawCheck {
    pub phase: Phase,
    pub samples: usize,
    pub passed: usize,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub per_record: Vec<Option<Phase>>,
    pub intervals: Vec<PhaseInterval>,
    /// First times at which the quadratic, linear and constant phases are seen.
    pub starts: [Option<f64>; 3],
    pub ordered: bool,
    pub laws: Vec<LawCheck>,
}

impl PhaseReport {
    /// The single phase of the track, if exactly one non-ambiguous phase occurs.
    pub fn single_phase(&self) -> Option<Phase> {
        let mut seen: Vec<Phase> = self.intervals.iter().filter_map(|i| i.phase).collect();
        seen.dedup();
        if seen.len() == 1 {
            Some(seen[0])
        } else {
            None
        }
    }

    pub fn law(&self, p: Phase) -> Option<&LawCheck> {
        self.laws.iter().find(|l| l.phase == p)
    }
}

fn phase_of(r: &TrackRecord, c0: f64) -> Option<Phase> {
    if r.is_zero() {
        return None;
    }
    let (q, l, c) = (r.u0_norm, r.u12_norm, r.u1_norm);
    if l <= c0 * q && c <= c0 * q {
        Some(Phase::Quadratic)
    } else if c0 * q <= l && c <= l {
        Some(Phase::Linear)
    } else if c0 * q <= c && l <= c {
        Some(Phase::Constant)
    } else {
        None
    }
}

/// Partitions the track by the dominance tests and checks the evolution law of each phase.
pub fn classify_phases(recs: &[TrackRecord], c0: f64, xi: f64) -> PhaseReport {
    let per_record: Vec<Option<Phase>> = recs.iter().map(|r| phase_of(r, c0)).collect();
    let mut intervals: Vec<PhaseInterval> = Vec::new();
    for (r, p) in recs.iter().zip(&per_record) {
        if r.is_zero() {
            continue;
        }
        match intervals.last_mut() {
            Some(iv) if iv.phase == *p => {
                iv.tau_end = r.tau;
                iv.samples += 1;
            }
            _ => intervals.push(PhaseInterval {
                phase: *p,
                tau_start: r.tau,
                tau_end: r.tau,
                samples: 1,
            }),
        }
    }
    let mut starts = [None; 3];
    let mut rank_seen = 0usize;
    let mut ordered = true;
    for iv in &intervals {
        if let Some(p) = iv.phase {
            let rank = p as usize;
            if starts[rank].is_none() {
                starts[rank] = Some(iv.tau_start);
            }
            if rank < rank_seen {
                ordered = false;
            }
            rank_seen = rank_seen.max(rank);
        }
    }

    let mut laws = Vec::new();
    for phase in [Phase::Quadratic, Phase::Linear, Phase::Constant] {
        let mut check = LawCheck {
            phase,
            samples: 0,
            passed: 0,
            max_ratio: 0.0,
        };
        for i in 1..recs.len().saturating_sub(1) {
            if per_record[i] != Some(phase) {
                continue;
            }
            let w = central_weights(recs[i - 1].tau, recs[i].tau, recs[i + 1].tau);
            let ratio = match phase {
                Phase::Quadratic => {
                    let r = &recs[i];
                    if !(r.u0_min <= -r.u0_max.abs()) || r.u0_min == 0.0 {
                        continue;
                    }
                    let d = w[0] * recs[i - 1].u0_min + w[1] * r.u0_min + w[2] * recs[i + 1].u0_min;
                    (d + SQRT_2 * r.u0_min * r.u0_min).abs() / (r.u0_min * r.u0_min)
                }
                Phase::Linear | Phase::Constant => {
                    let deg = if phase == Phase::Linear { 1 } else { 0 };
                    let rate = if phase == Phase::Linear { 0.5 } else { 1.0 };
                    let part = |j: usize| recs[j].uplus.degree_part(deg);
                    let d = part(i - 1).scaled(w[0]).axpy(w[1], &part(i)).axpy(w[2], &part(i + 1));
                    let cur = part(i);
                    if cur.norm() == 0.0 {
                        continue;
                    }
                    d.axpy(-rate, &cur).norm() / cur.norm()
                }
            };
            check.samples += 1;
            if ratio <= xi {
                check.passed += 1;
            }
            check.max_ratio = check.max_ratio.max(ratio);
        }
        if check.samples > 0 {
            laws.push(check);
        }
    }
    PhaseReport {
        per_record,
        intervals,
        starts,
        ordered,
        laws,
    }
}

/// Writes records as CSV: `tau,R,Upp_norm,U0_min,U0_max,U12_norm,U1_norm,Uminus,residual_plus,phase`.
pub fn write_track_csv<W: Write>(recs: &[TrackRecord], mut w: W) -> Result<()> {
    writeln!(w, "tau,R,Upp_norm,U0_min,U0_max,U12_norm,U1_norm,Uminus,residual_plus,phase")?;
    for r in recs {
        let res = r.residual_plus.map(|v| format!("{v:.16e}")).unwrap_or_default();
        let ph = r.phase.map(|p| p.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            r.tau, r.r, r.upp_norm, r.u0_min, r.u0_max, r.u12_norm, r.u1_norm, r.uminus, res, ph
        )?;
    }
    Ok(())
}
