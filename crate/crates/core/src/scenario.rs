//! Scenario files, the simulate-track-classify-extract pipeline and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hermite::{self, Dimensions, ModeVector, MultiIndex};
use crate::linear_mode::{self, AsymptoticsReport, LeadingTrajectory};
use crate::pde::{RadialGraphState, Solver, SolverConfig};
use crate::quadratic_mode::{self, BarU, QReport};
use crate::taylor::{self, DerivedConstants};
use crate::tracker::{self, Phase, PhaseReport, Tracker, TrackerConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedMode {
    /// Hermite degrees per axis.
    pub index: Vec<usize>,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedNoise {
    pub amplitude: f64,
    pub max_degree: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    #[serde(default)]
    pub modes: Vec<SeedMode>,
    /// Extra field in the variables `x1`, `x2`, e.g. `"0.01 * math::exp(-x1^2)"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
    /// Uniform random coefficients in `[-amplitude, amplitude]` drawn from `rng_seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<SeedNoise>,
    /// Multiply the seed by `omega_R`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_radius: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauSpan {
    pub start: f64,
    pub end: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Also write the final state as a binary snapshot.
    #[serde(default)]
    pub snapshot: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub dims: Dimensions,
    pub solver: SolverConfig,
    pub tracker: TrackerConfig,
    pub seed: SeedSpec,
    pub tau: TauSpan,
    /// Solver steps between tracked states.
    #[serde(default = "default_every")]
    pub observe_every: usize,
    pub output: OutputSpec,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_every() -> usize {
    10
}

fn mode_index(dims: &Dimensions, index: &[usize]) -> Result<MultiIndex> {
    if index.len() != dims.k() {
        return Err(Error::Config(format!(
            "seed.modes.index {index:?} must have k = {} entries",
            dims.k()
        )));
    }
    Ok(MultiIndex::new(index.to_vec()))
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn config_hash(&self) -> Result<String> {
        Ok(sha256_hex(self.to_toml()?.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate(self.dims.k())?;
        self.tracker.validate()?;
        if !(self.tau.end >= self.tau.start) {
            return Err(Error::Config("tau.end must not precede tau.start".into()));
        }
        for m in &self.seed.modes {
            let idx = mode_index(&self.dims, &m.index)?;
            if idx.degree() > self.tracker.cap {
                return Err(Error::Config(format!(
                    "seed mode {idx} exceeds the degree cap {}",
                    self.tracker.cap
                )));
            }
            if !m.amplitude.is_finite() || m.amplitude.abs() >= self.solver.blowup_guard {
                return Err(Error::Config(format!(
                    "seed amplitude {} is outside the solver guard",
                    m.amplitude
                )));
            }
        }
        if let Some(n) = &self.seed.noise {
            if n.max_degree > self.tracker.cap || !(n.amplitude >= 0.0) {
                return Err(Error::Config("seed.noise needs amplitude >= 0 and max_degree <= cap".into()));
            }
        }
        if let Some(e) = &self.seed.expression {
            evalexpr::build_operator_tree::<evalexpr::DefaultNumericTypes>(e)
                .map_err(|err| Error::Config(format!("seed.expression: {err}")))?;
        }
        if let Some(r) = self.seed.cutoff_radius {
            if !(r >= 1.0) {
                return Err(Error::Config("seed.cutoff_radius must be at least 1".into()));
            }
        }
        Ok(())
    }

    /// Mode part of the seed, including noise.
    pub fn seed_modes(&self) -> Result<ModeVector> {
        let k = self.dims.k();
        let mut v = ModeVector::zero(k, self.tracker.cap);
        for m in &self.seed.modes {
            v.add_to(mode_index(&self.dims, &m.index)?, m.amplitude);
        }
        if let Some(n) = &self.seed.noise {
            let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
            for idx in hermite::basis(k, n.max_degree) {
                let r: f64 = rng.random_range(-1.0..=1.0);
                v.add_to(idx, n.amplitude * r);
            }
        }
        Ok(v)
    }

    pub fn initial_state(&self, solver: &Solver) -> Result<RadialGraphState> {
        let modes = self.seed_modes()?;
        let expr = match &self.seed.expression {
            Some(e) => Some(
                evalexpr::build_operator_tree::<evalexpr::DefaultNumericTypes>(e)
                    .map_err(|err| Error::Config(format!("seed.expression: {err}")))?,
            ),
            None => None,
        };
        let bad = std::cell::RefCell::new(None::<String>);
        let state = solver.state_from_fn(self.tau.start, |x| {
            let mut u = modes.eval(x);
            if let Some(tree) = &expr {
                use evalexpr::ContextWithMutableVariables;
                let mut ctx = evalexpr::HashMapContext::<evalexpr::DefaultNumericTypes>::new();
                for (i, xi) in x.iter().enumerate() {
                    let _ = ctx.set_value(format!("x{}", i + 1), evalexpr::Value::Float(*xi));
                }
                match tree.eval_number_with_context(&ctx) {
                    Ok(v) => u += v,
                    Err(e) => {
                        bad.borrow_mut().get_or_insert(e.to_string());
                    }
                }
            }
            match self.seed.cutoff_radius {
                Some(r) => u * tracker::cutoff(x, r),
                None => u,
            }
        });
        if let Some(e) = bad.into_inner() {
            return Err(Error::Config(format!("seed.expression: {e}")));
        }
        if state.sup_norm() >= self.solver.blowup_guard {
            return Err(Error::Config("seed exceeds the solver guard".into()));
        }
        Ok(state)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    taylor::hex(&Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Extraction {
    Linear(AsymptoticsReport),
    Quadratic(QReport),
    None { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    /// `None` when the simulation reached `tau.end`.
    pub termination: Option<String>,
    pub tau_reached: f64,
    pub records: usize,
    pub phases: PhaseReport,
    pub extraction: Extraction,
    pub files: BTreeMap<String, String>,
}

impl RunReport {
    pub fn success(&self) -> bool {
        self.termination.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub config_sha256: String,
    pub constants_checksum: String,
    pub versions: BTreeMap<String, String>,
    pub threshold_c: f64,
    pub cstar: f64,
    pub files: BTreeMap<String, String>,
}

/// Everything a run produces, before anything is written.
pub struct RunOutput {
    pub report: RunReport,
    pub tracker: Tracker,
    pub final_state: RadialGraphState,
}

fn leading_trajectory(t: &Tracker) -> LeadingTrajectory {
    LeadingTrajectory {
        tau: t.records.iter().map(|r| r.tau).collect(),
        states: t.records.iter().map(|r| r.leading()).collect(),
    }
}

fn extract(t: &Tracker, phases: &PhaseReport, consts: &DerivedConstants) -> Extraction {
    let Some(last) = t.records.last() else {
        return Extraction::None {
            reason: "empty track".into(),
        };
    };
    if t.records.iter().all(|r| r.uplus.max_abs() == 0.0) {
        return Extraction::None {
            reason: "zero track".into(),
        };
    }
    let last_phase = phases.intervals.iter().rev().find_map(|i| i.phase);
    match last_phase {
        Some(Phase::Linear) | Some(Phase::Constant) => {
            let traj = leading_trajectory(t);
            match linear_mode::extract_asymptotics(&traj, (traj.tau[0], last.tau)) {
                Ok(r) => Extraction::Linear(r),
                Err(e) => Extraction::None { reason: e.to_string() },
            }
        }
        Some(Phase::Quadratic) => {
            let u = last.leading().c;
            let res = BarU::new(&u, last.tau, consts.cstar)
                .and_then(|h| quadratic_mode::q_invariant(&h))
                .map(|q| QReport::new(&q, consts.cstar, None));
            match res {
                Ok(r) => Extraction::Quadratic(r),
                Err(e) => Extraction::None { reason: e.to_string() },
            }
        }
        None => Extraction::None {
            reason: "no dominant phase".into(),
        },
    }
}

/// Simulates, tracks, classifies and extracts without touching the filesystem.
pub fn execute(s: &Scenario) -> Result<RunOutput> {
    s.validate()?;
    let solver = Solver::new(s.dims, s.solver.clone())?;
    let u0 = s.initial_state(&solver)?;
    let mut tr = Tracker::new(s.dims, s.tracker.clone())?;
    let mut last = u0.clone();
    let outcome = solver.simulate_with(&u0, s.tau.end, s.observe_every, |st| {
        last = st.clone();
        tr.observe(st)
    });
    let termination = match outcome {
        Ok(_) => None,
        Err(e @ (Error::Degenerate { .. } | Error::BlowUp { .. })) => Some(e.to_string()),
        Err(e) => return Err(e),
    };
    let phases = tr.finalize()?;
    let consts = DerivedConstants::derive(&s.dims)?;
    let extraction = extract(&tr, &phases, &consts);
    let report = RunReport {
        name: s.name.clone(),
        termination,
        tau_reached: last.tau,
        records: tr.records.len(),
        phases,
        extraction,
        files: BTreeMap::new(),
    };
    Ok(RunOutput {
        report,
        tracker: tr,
        final_state: last,
    })
}

/// Runs a scenario and writes `track.csv`, `phases.json`, `extraction.json`,
/// optionally `final.bin`, then `report.json` and `manifest.json`.
pub fn run(s: &Scenario) -> Result<RunReport> {
    let mut out = execute(s)?;
    let dir = &s.output.dir;
    fs::create_dir_all(dir)?;
    let mut files = BTreeMap::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        fs::write(dir.join(name), &bytes)?;
        files.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    };
    let mut csv = Vec::new();
    tracker::write_track_csv(&out.tracker.records, &mut csv)?;
    put("track.csv", csv)?;
    put("phases.json", serde_json::to_vec_pretty(&out.report.phases)?)?;
    put("extraction.json", serde_json::to_vec_pretty(&out.report.extraction)?)?;
    if s.output.snapshot {
        let mut b = Vec::new();
        out.final_state.write_binary(&mut b)?;
        put("final.bin", b)?;
    }
    put("scenario.toml", s.to_toml()?.into_bytes())?;
    out.report.files = files.clone();
    fs::write(dir.join("report.json"), serde_json::to_vec_pretty(&out.report)?)?;
    let consts = DerivedConstants::derive(&s.dims)?;
    let manifest = Manifest {
        name: s.name.clone(),
        config_sha256: s.config_hash()?,
        constants_checksum: taylor::constants_checksum(),
        versions: versions(),
        threshold_c: consts.threshold(),
        cstar: consts.cstar,
        files,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(out.report)
}

pub fn versions() -> BTreeMap<String, String> {
    let mut v = BTreeMap::new();
    v.insert("cylflow".into(), env!("CARGO_PKG_VERSION").into());
    v.insert("manifest".into(), "1".into());
    v
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    Ok(serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?)
}

/// Input of the `matrix-ode`, `q-invariant` and `q-inverse` commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    /// Ambient dimension; `k` is the matrix size.
    pub n: usize,
    pub matrix: Vec<Vec<f64>>,
    /// Time at which `matrix` is the state (ignored for `q-inverse`).
    #[serde(default)]
    pub tau0: f64,
    /// Far end of the sampled trajectory.
    #[serde(default = "default_tau1")]
    pub tau1: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_tau1() -> f64 {
    -1e4
}
fn default_samples() -> usize {
    200
}

impl MatrixSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let m: MatrixSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        m.dims()?;
        crate::symmetric::SymMatrixK::from_rows(&m.matrix)?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn dims(&self) -> Result<Dimensions> {
        Dimensions::new(self.n, self.matrix.len())
    }

    pub fn matrix(&self) -> Result<crate::symmetric::SymMatrixK> {
        crate::symmetric::SymMatrixK::from_rows(&self.matrix)
    }

    /// Sample times from `from` to `tau1`, geometrically spaced when both are negative.
    pub fn sample_times(&self, from: f64) -> Vec<f64> {
        let n = self.samples.max(2);
        (1..=n)
            .map(|i| {
                let s = i as f64 / n as f64;
                if from < 0.0 && self.tau1 < 0.0 {
                    -((-from).ln() + s * ((-self.tau1).ln() - (-from).ln())).exp()
                } else {
                    from + s * (self.tau1 - from)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
name = "constant"
dims = { n = 2, k = 1 }
rng_seed = 3

[solver]
h = 0.1
dt = 0.02
r_dom = 8.0
scheme = "imex"

[tracker]
lambda = -1.5
j = 3
eta = 0.1
eps = 0.1
r_star = 4.0
radius = { kind = "fixed", r = 6.0 }

[seed]
modes = [{ index = [0], amplitude = 0.01 }]
cutoff_radius = 6.0

[tau]
start = 0.0
end = 0.2

[output]
dir = "out"
"#;

    #[test]
    fn parse_round_trip() {
        let s = Scenario::parse(EXAMPLE).unwrap();
        let again = Scenario::parse(&s.to_toml().unwrap()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn unknown_key_names_field() {
        let bad = EXAMPLE.replace("eps = 0.1", "eps = 0.1\nepsilon = 0.2");
        let err = Scenario::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("epsilon"), "{err}");
    }

    #[test]
    fn expression_seed() {
        let s = Scenario::parse(&EXAMPLE.replace(
            "cutoff_radius = 6.0",
            "cutoff_radius = 6.0\nexpression = \"0.001 * x1\"",
        ))
        .unwrap();
        let solver = Solver::new(s.dims, s.solver.clone()).unwrap();
        let st = s.initial_state(&solver).unwrap();
        let i = solver.grid.n / 2 + 5;
        let x = solver.grid.coord(i);
        assert!((st.values[i] - (0.01 + 0.001 * x)).abs() < 1e-15);
    }
}
