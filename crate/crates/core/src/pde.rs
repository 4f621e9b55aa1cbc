//! Method-of-lines solver for the rotationally symmetric rescaled graph equation
//!
//! `u_t = Delta u - x.grad u / 2 + u - u^2 / (2(1+u)) - grad^2 u(grad u, grad u) / ((2(n-k))^{-1} + |grad u|^2)`
//!
//! on `[-R_dom, R_dom]^k`, `k` in {1, 2}.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{Dimensions, FieldJet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Classical fourth-order Runge-Kutta on the full right-hand side.
    Rk4,
    /// Crank-Nicolson on the drift Laplacian with a Heun corrector on the rest.
    Imex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Ghost node `u_N = 2 u_{N-1} - u_{N-2}`: zero second normal derivative.
    LinearExtrapolation,
    /// Boundary values held at their initial values.
    FrozenMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub h: f64,
    pub dt: f64,
    pub r_dom: f64,
    pub scheme: Scheme,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    /// Safety margin in the explicit bound `dt <= h^2 / (2k(1 + margin))`.
    #[serde(default = "default_margin")]
    pub stability_margin: f64,
    /// Bound on `|u| + |grad u|`.
    #[serde(default = "default_guard")]
    pub blowup_guard: f64,
    /// Width of the boundary layer where the drift is upwinded.
    #[serde(default = "default_band")]
    pub upwind_band: f64,
}

fn default_boundary() -> Boundary {
    Boundary::LinearExtrapolation
}
fn default_margin() -> f64 {
    0.1
}
fn default_guard() -> f64 {
    50.0
}
fn default_band() -> f64 {
    1.0
}

impl SolverConfig {
    pub fn new(h: f64, dt: f64, r_dom: f64, scheme: Scheme) -> Self {
        SolverConfig {
            h,
            dt,
            r_dom,
            scheme,
            boundary: default_boundary(),
            stability_margin: default_margin(),
            blowup_guard: default_guard(),
            upwind_band: default_band(),
        }
    }

    /// Largest explicit step the configuration allows.
    pub fn explicit_dt_bound(&self, k: usize) -> f64 {
        self.h * self.h / (2.0 * k as f64 * (1.0 + self.stability_margin))
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if !(self.h > 0.0 && self.dt > 0.0 && self.r_dom > 0.0) {
            return Err(Error::Pde("h, dt and r_dom must be positive".into()));
        }
        if !(1..=2).contains(&k) {
            return Err(Error::Pde(format!("the solver supports k = 1 or 2, got {k}")));
        }
        let cells = 2.0 * self.r_dom / self.h;
        if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) || cells.round() < 4.0 {
            return Err(Error::Pde(format!(
                "2 r_dom / h = {cells} must be an integer of at least 4"
            )));
        }
        if self.scheme == Scheme::Rk4 && self.dt > self.explicit_dt_bound(k) * (1.0 + 1e-12) {
            return Err(Error::Pde(format!(
                "explicit step dt = {} exceeds the stability bound {}",
                self.dt,
                self.explicit_dt_bound(k)
            )));
        }
        Ok(())
    }
}

/// Tensor grid with `n` nodes per axis, `x_i = -R_dom + i h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub k: usize,
    pub h: f64,
    pub r_dom: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(k: usize, h: f64, r_dom: f64) -> Self {
        let n = (2.0 * r_dom / h).round() as usize + 1;
        Grid { k, h, r_dom, n }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.k as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.r_dom + i as f64 * self.h
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    /// Multi-index of a flat node index (last axis fastest).
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.k == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let ij = self.unflatten(idx);
        (0..self.k).map(|d| self.coord(ij[d])).collect()
    }

    fn stride(&self, axis: usize) -> usize {
        if self.k == 1 || axis == 1 {
            1
        } else {
            self.n
        }
    }
}

/// Sampled graph function over the cylinder at rescaled time `tau`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGraphState {
    pub dims: Dimensions,
    pub tau: f64,
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl RadialGraphState {
    pub fn from_fn<F: Fn(&[f64]) -> f64>(dims: Dimensions, grid: Grid, tau: f64, f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        RadialGraphState {
            dims,
            tau,
            grid,
            values,
        }
    }

    pub fn zero(dims: Dimensions, grid: Grid, tau: f64) -> Self {
        Self::from_fn(dims, grid, tau, |_| 0.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Value at grid multi-index `(i, j)` with indices in `-1..=n`, extrapolating
    /// linearly past the boundary.
    fn ext(&self, i: isize, j: isize) -> f64 {
        let n = self.grid.n as isize;
        if self.grid.k == 1 {
            return ext1(&self.values, 0, 1, n, i);
        }
        let row = |ii: isize| -> f64 {
            let base = (ii as usize) * self.grid.n;
            ext1(&self.values, base, 1, n, j)
        };
        if i < 0 {
            2.0 * row(0) - row(1)
        } else if i >= n {
            2.0 * row(n - 1) - row(n - 2)
        } else {
            row(i)
        }
    }

    /// Second-order central jet at node `idx`, with ghost extrapolation.
    pub fn jet(&self, idx: usize) -> FieldJet {
        let g = &self.grid;
        let h = g.h;
        let [i, j] = g.unflatten(idx);
        let (i, j) = (i as isize, j as isize);
        let u = self.values[idx];
        if g.k == 1 {
            let up = self.ext(i + 1, 0);
            let um = self.ext(i - 1, 0);
            return FieldJet {
                value: u,
                grad: vec![(up - um) / (2.0 * h)],
                hess: vec![(up - 2.0 * u + um) / (h * h)],
            };
        }
        let e = |a: isize, b: isize| self.ext(i + a, j + b);
        let gx = (e(1, 0) - e(-1, 0)) / (2.0 * h);
        let gy = (e(0, 1) - e(0, -1)) / (2.0 * h);
        let hxx = (e(1, 0) - 2.0 * u + e(-1, 0)) / (h * h);
        let hyy = (e(0, 1) - 2.0 * u + e(0, -1)) / (h * h);
        let hxy = (e(1, 1) - e(1, -1) - e(-1, 1) + e(-1, -1)) / (4.0 * h * h);
        FieldJet {
            value: u,
            grad: vec![gx, gy],
            hess: vec![hxx, hxy, hxy, hyy],
        }
    }
}

fn ext1(v: &[f64], base: usize, stride: usize, n: isize, i: isize) -> f64 {
    let at = |j: isize| v[base + j as usize * stride];
    if i < 0 {
        2.0 * at(0) - at(1)
    } else if i >= n {
        2.0 * at(n - 1) - at(n - 2)
    } else {
        at(i)
    }
}

/// Pointwise nonlinear part `-u^2/(2(1+u)) - grad^2 u(grad u, grad u)/((2(n-k))^{-1} + |grad u|^2)`.
pub fn nonlinear_term(dims: &Dimensions, j: &FieldJet) -> f64 {
    let u = j.value;
    -0.5 * u * u / (1.0 + u) - j.hess_grad_grad() / (1.0 / dims.radius_sq() + j.grad_sq())
}

/// Tridiagonal coefficients of the drift Laplacian along one axis.
#[derive(Clone, Debug)]
struct Tri {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

fn drift_laplacian(grid: &Grid, cfg: &SolverConfig) -> Tri {
    let n = grid.n;
    let h = grid.h;
    let ih2 = 1.0 / (h * h);
    let mut t = Tri {
        lower: vec![0.0; n],
        diag: vec![0.0; n],
        upper: vec![0.0; n],
    };
    for i in 0..n {
        let x = grid.coord(i);
        let boundary = i == 0 || i == n - 1;
        if boundary && cfg.boundary == Boundary::FrozenMode {
            continue;
        }
        // the ghost node makes the boundary second difference vanish
        let (lo, di, up) = if boundary { (0.0, 0.0, 0.0) } else { (ih2, -2.0 * ih2, ih2) };
        let upwind = boundary || x.abs() > grid.r_dom - cfg.upwind_band;
        let (dl, dd, du) = if !upwind {
            (x / (4.0 * h), 0.0, -x / (4.0 * h))
        } else if x > 0.0 {
            (0.5 * x / h, -0.5 * x / h, 0.0)
        } else {
            (0.0, 0.5 * x / h, -0.5 * x / h)
        };
        t.lower[i] = lo + dl;
        t.diag[i] = di + dd;
        t.upper[i] = up + du;
    }
    t
}

/// Precomputed operators for one grid and configuration.
#[derive(Clone, Debug)]
pub struct Solver {
    pub dims: Dimensions,
    pub grid: Grid,
    pub cfg: SolverConfig,
    tri: Tri,
}

impl Solver {
    pub fn new(dims: Dimensions, cfg: SolverConfig) -> Result<Self> {
        cfg.validate(dims.k())?;
        let grid = Grid::new(dims.k(), cfg.h, cfg.r_dom);
        let tri = drift_laplacian(&grid, &cfg);
        Ok(Solver {
            dims,
            grid,
            cfg,
            tri,
        })
    }

    pub fn state_from_fn<F: Fn(&[f64]) -> f64>(&self, tau: f64, f: F) -> RadialGraphState {
        RadialGraphState::from_fn(self.dims, self.grid.clone(), tau, f)
    }

    fn check_state(&self, s: &RadialGraphState) -> Result<()> {
        if s.grid != self.grid {
            return Err(Error::Pde("state grid does not match the solver grid".into()));
        }
        Ok(())
    }

    fn boundary_node(&self, idx: usize) -> bool {
        let n = self.grid.n;
        let [i, j] = self.grid.unflatten(idx);
        i == 0 || i == n - 1 || (self.grid.k == 2 && (j == 0 || j == n - 1))
    }

    /// `sum_d A_d u`.
    fn linear(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let n = self.grid.n;
        for axis in 0..self.grid.k {
            let stride = self.grid.stride(axis);
            for idx in 0..v.len() {
                let i = self.grid.unflatten(idx)[if self.grid.k == 1 { 0 } else { axis }];
                let mut s = self.tri.diag[i] * v[idx];
                if i > 0 {
                    s += self.tri.lower[i] * v[idx - stride];
                }
                if i + 1 < n {
                    s += self.tri.upper[i] * v[idx + stride];
                }
                out[idx] += s;
            }
        }
    }

    /// `u + nonlinear_term`, with the degeneration and blow-up checks.
    fn explicit_part(&self, s: &RadialGraphState, out: &mut [f64]) -> Result<()> {
        for idx in 0..s.values.len() {
            let u = s.values[idx];
            if !(1.0 + u > 0.0) {
                return Err(Error::Degenerate {
                    x: self.grid.point(idx),
                    value: 1.0 + u,
                    tau: s.tau,
                });
            }
            let j = s.jet(idx);
            let size = u.abs() + j.grad_sq().sqrt();
            if !(size <= self.cfg.blowup_guard) {
                return Err(Error::BlowUp { tau: s.tau, size });
            }
            out[idx] = if self.cfg.boundary == Boundary::FrozenMode && self.boundary_node(idx) {
                0.0
            } else {
                u + nonlinear_term(&self.dims, &j)
            };
        }
        Ok(())
    }

    /// Full right-hand side on the grid.
    pub fn rhs(&self, s: &RadialGraphState) -> Result<Vec<f64>> {
        self.check_state(s)?;
        let mut lin = vec![0.0; s.values.len()];
        let mut out = vec![0.0; s.values.len()];
        self.linear(&s.values, &mut lin);
        self.explicit_part(s, &mut out)?;
        for (o, l) in out.iter_mut().zip(&lin) {
            *o += l;
        }
        Ok(out)
    }

    /// Solves `prod_d (I - theta dt A_d) x = b` in place, one axis at a time.
    fn implicit_solve(&self, b: &mut [f64], theta_dt: f64) -> Result<()> {
        let n = self.grid.n;
        let lines = self.grid.len() / n;
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for axis in 0..self.grid.k {
            let stride = self.grid.stride(axis);
            for line in 0..lines {
                // first node of the line
                let start = if self.grid.k == 1 {
                    0
                } else if axis == 0 {
                    line
                } else {
                    line * n
                };
                // Thomas algorithm
                let a = |i: usize| -theta_dt * self.tri.lower[i];
                let bb = |i: usize| 1.0 - theta_dt * self.tri.diag[i];
                let cc = |i: usize| -theta_dt * self.tri.upper[i];
                let mut denom = bb(0);
                if denom.abs() < 1e-300 {
                    return Err(Error::Pde("singular implicit system".into()));
                }
                c[0] = cc(0) / denom;
                d[0] = b[start] / denom;
                for i in 1..n {
                    denom = bb(i) - a(i) * c[i - 1];
                    if denom.abs() < 1e-300 {
                        return Err(Error::Pde("singular implicit system".into()));
                    }
                    c[i] = cc(i) / denom;
                    d[i] = (b[start + i * stride] - a(i) * d[i - 1]) / denom;
                }
                b[start + (n - 1) * stride] = d[n - 1];
                for i in (0..n - 1).rev() {
                    let next = b[start + (i + 1) * stride];
                    b[start + i * stride] = d[i] - c[i] * next;
                }
            }
        }
        Ok(())
    }

    /// One time step of length `dt`.
    pub fn step_dt(&self, s: &RadialGraphState, dt: f64) -> Result<RadialGraphState> {
        self.check_state(s)?;
        let len = s.values.len();
        let out = match self.cfg.scheme {
            Scheme::Rk4 => {
                let k1 = self.rhs(s)?;
                let mut tmp = s.clone();
                let shift = |tmp: &mut RadialGraphState, k: &[f64], a: f64, tau: f64| {
                    for i in 0..len {
                        tmp.values[i] = s.values[i] + a * k[i];
                    }
                    tmp.tau = tau;
                };
                shift(&mut tmp, &k1, 0.5 * dt, s.tau + 0.5 * dt);
                let k2 = self.rhs(&tmp)?;
                shift(&mut tmp, &k2, 0.5 * dt, s.tau + 0.5 * dt);
                let k3 = self.rhs(&tmp)?;
                shift(&mut tmp, &k3, dt, s.tau + dt);
                let k4 = self.rhs(&tmp)?;
                for i in 0..len {
                    tmp.values[i] = s.values[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                tmp
            }
            Scheme::Imex => {
                let mut au = vec![0.0; len];
                self.linear(&s.values, &mut au);
                let mut n0 = vec![0.0; len];
                self.explicit_part(s, &mut n0)?;
                let mut delta: Vec<f64> = (0..len).map(|i| dt * (au[i] + n0[i])).collect();
                self.implicit_solve(&mut delta, 0.5 * dt)?;
                let mut pred = s.clone();
                for i in 0..len {
                    pred.values[i] = s.values[i] + delta[i];
                }
                pred.tau = s.tau + dt;
                let mut n1 = vec![0.0; len];
                self.explicit_part(&pred, &mut n1)?;
                let mut delta: Vec<f64> =
                    (0..len).map(|i| dt * (au[i] + 0.5 * (n0[i] + n1[i]))).collect();
                self.implicit_solve(&mut delta, 0.5 * dt)?;
                for i in 0..len {
                    pred.values[i] = s.values[i] + delta[i];
                }
                pred
            }
        };
        if let Some(i) = out.values.iter().position(|v| !(1.0 + v > 0.0)) {
            return Err(Error::Degenerate {
                x: self.grid.point(i),
                value: 1.0 + out.values[i],
                tau: out.tau,
            });
        }
        Ok(out)
    }

    pub fn step(&self, s: &RadialGraphState) -> Result<RadialGraphState> {
        self.step_dt(s, self.cfg.dt)
    }

    /// Steps from `u0.tau` to `tau_end`, calling `observe` on the initial state
    /// and every `every` steps after it (and on the final state). The step is
    /// shortened so that an integer number of steps lands on `tau_end`.
    pub fn simulate_with<F>(&self, u0: &RadialGraphState, tau_end: f64, every: usize, mut observe: F) -> Result<RadialGraphState>
    where
        F: FnMut(&RadialGraphState) -> Result<()>,
    {
        self.check_state(u0)?;
        let span = tau_end - u0.tau;
        if span < 0.0 {
            return Err(Error::Pde("tau only runs forward".into()));
        }
        let steps = (span / self.cfg.dt - 1e-9).ceil().max(0.0) as usize;
        let dt = if steps == 0 { 0.0 } else { span / steps as f64 };
        let every = every.max(1);
        let mut s = u0.clone();
        observe(&s)?;
        for i in 1..=steps {
            let mut next = self.step_dt(&s, dt)?;
            next.tau = u0.tau + i as f64 * dt;
            s = next;
            if i % every == 0 || i == steps {
                observe(&s)?;
            }
        }
        Ok(s)
    }

    /// Decimated trajectory.
    pub fn simulate(&self, u0: &RadialGraphState, tau_end: f64, every: usize) -> Result<Vec<RadialGraphState>> {
        let mut out = Vec::new();
        self.simulate_with(u0, tau_end, every, |s| {
            out.push(s.clone());
            Ok(())
        })?;
        Ok(out)
    }
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"RMCFSNAP";
const SNAPSHOT_VERSION: u32 = 1;

impl RadialGraphState {
    /// CSV with columns `tau, x1[, x2], u`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let head = if self.grid.k == 1 { "tau,x1,u" } else { "tau,x1,x2,u" };
        writeln!(w, "{head}")?;
        for (idx, v) in self.values.iter().enumerate() {
            let p = self.grid.point(idx);
            let xs: Vec<String> = p.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(w, "{:.16e},{},{:.16e}", self.tau, xs.join(","), v)?;
        }
        Ok(())
    }

    /// Binary snapshot: magic `RMCFSNAP`, then little-endian `u32` version, `u32 n`,
    /// `u32 k`, `f64 h`, `f64 R_dom`, `u64` node count, `f64 tau`, and the values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&(self.dims.n() as u32).to_le_bytes())?;
        w.write_all(&(self.dims.k() as u32).to_le_bytes())?;
        w.write_all(&self.grid.h.to_le_bytes())?;
        w.write_all(&self.grid.r_dom.to_le_bytes())?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        w.write_all(&self.tau.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Pde("not a snapshot file".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        let mut u32_ = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut b4)?;
            Ok(u32::from_le_bytes(b4))
        };
        let version = u32_(&mut r)?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Pde(format!("unsupported snapshot version {version}")));
        }
        let n = u32_(&mut r)? as usize;
        let k = u32_(&mut r)? as usize;
        let mut f64_ = |r: &mut R| -> Result<f64> {
            r.read_exact(&mut b8)?;
            Ok(f64::from_le_bytes(b8))
        };
        let h = f64_(&mut r)?;
        let r_dom = f64_(&mut r)?;
        let mut b8n = [0u8; 8];
        r.read_exact(&mut b8n)?;
        let count = u64::from_le_bytes(b8n) as usize;
        let tau = f64_(&mut r)?;
        let dims = Dimensions::new(n, k)?;
        let grid = Grid::new(k, h, r_dom);
        if grid.len() != count {
            return Err(Error::Pde(format!(
                "snapshot node count {count} does not match its grid ({})",
                grid.len()
            )));
        }
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(f64_(&mut r)?);
        }
        Ok(RadialGraphState {
            dims,
            tau,
            grid,
            values,
        })
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_binary(std::io::BufWriter::new(f))
    }

    pub fn load_binary(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_binary(std::io::BufReader::new(f))
    }

    /// Reads the CSV format written by [`write_csv`](Self::write_csv); `n` is not
    /// stored in the CSV and must be supplied.
    pub fn read_csv(text: &str, n: usize) -> Result<Self> {
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| Error::Pde("empty snapshot CSV".into()))?;
        let k = head.split(',').count() - 2;
        let dims = Dimensions::new(n, k)?;
        let mut tau = 0.0;
        let mut pts = Vec::new();
        let mut values = Vec::new();
        for l in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<f64> = l
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Pde(format!("snapshot CSV: {e}")))?;
            if f.len() != k + 2 {
                return Err(Error::Pde("snapshot CSV row has the wrong width".into()));
            }
            tau = f[0];
            pts.push(f[1]);
            values.push(f[k + 1]);
        }
        let count = values.len();
        let per_axis = if k == 1 { count } else { (count as f64).sqrt().round() as usize };
        if per_axis < 2 || per_axis.pow(k as u32) != count {
            return Err(Error::Pde("snapshot CSV is not a full tensor grid".into()));
        }
        let r_dom = -pts[0];
        let h = 2.0 * r_dom / (per_axis - 1) as f64;
        Ok(RadialGraphState {
            dims,
            tau,
            grid: Grid::new(k, h, r_dom),
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver(k: usize, scheme: Scheme) -> Solver {
        let dims = Dimensions::new(k + 1, k).unwrap();
        let h = 0.25;
        let dt = if scheme == Scheme::Rk4 { 0.02 / k as f64 } else { 0.02 };
        Solver::new(dims, SolverConfig::new(h, dt, 6.0, scheme)).unwrap()
    }

    #[test]
    fn constant_rhs() {
        let s = solver(1, Scheme::Rk4);
        let st = s.state_from_fn(0.0, |_| 0.1);
        let r = s.rhs(&st).unwrap();
        let want = 0.1 - 0.005 / 1.1;
        assert!(r.iter().all(|v| (v - want).abs() < 1e-15));
    }

    #[test]
    fn degenerate_state_is_rejected() {
        let s = solver(1, Scheme::Imex);
        let st = s.state_from_fn(0.0, |x| if x[0].abs() < 0.5 { -1.2 } else { 0.0 });
        assert!(matches!(s.rhs(&st), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn explicit_bound_enforced() {
        let dims = Dimensions::new(2, 1).unwrap();
        assert!(Solver::new(dims, SolverConfig::new(0.1, 0.01, 4.0, Scheme::Rk4)).is_err());
        assert!(Solver::new(dims, SolverConfig::new(0.1, 0.01, 4.0, Scheme::Imex)).is_ok());
    }

    #[test]
    fn binary_snapshot_round_trip() {
        let s = solver(2, Scheme::Imex);
        let st = s.state_from_fn(1.25, |x| 0.01 * x[0] - 0.002 * x[1] * x[1]);
        let mut buf = Vec::new();
        st.write_binary(&mut buf).unwrap();
        let back = RadialGraphState::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, st);
    }

    #[test]
    fn csv_snapshot_round_trip() {
        let s = solver(1, Scheme::Imex);
        let st = s.state_from_fn(0.5, |x| 0.3 * (x[0] / 3.0).sin());
        let mut buf = Vec::new();
        st.write_csv(&mut buf).unwrap();
        let back = RadialGraphState::read_csv(std::str::from_utf8(&buf).unwrap(), 2).unwrap();
        assert_eq!(back.values, st.values);
        assert_eq!(back.grid.n, st.grid.n);
    }
}
