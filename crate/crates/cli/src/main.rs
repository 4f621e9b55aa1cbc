use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use cylflow::ode::Output;
use cylflow::pde::RadialGraphState;
use cylflow::quadratic_mode::{self, BarU, QReport};
use cylflow::scenario::{self, MatrixSpec, Scenario};
use cylflow::taylor::{self, DerivedConstants};
use cylflow::tracker::{self, RadiusPolicy, TrackerConfig};
use cylflow::verify::{self, Suite};
use cylflow::{Error, Result};

/// Thread count for `simulate` sweeps.
const THREADS_VAR: &str = "CYLFLOW_THREADS";

#[derive(Parser)]
#[command(name = "cylflow", version, about = "Mode analysis of rescaled mean curvature flow near cylinders")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one or more scenario files (in parallel, CYLFLOW_THREADS workers).
    Simulate {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Localized projections U+ and U- of a binary snapshot.
    Modes {
        snapshot: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long = "R")]
        r: f64,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
    },
    /// Integrate the matrix ODE from a matrix file; CSV of eigenvalues on stdout.
    MatrixOde { file: PathBuf },
    /// Invariant Q of the solution through a non-positive definite matrix.
    QInvariant { config: PathBuf },
    /// Solution whose invariant is the given non-negative definite matrix.
    QInverse { file: PathBuf },
    /// Run a self-check suite.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 42)]
        rng_seed: u64,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print (or write) the generated constants table.
    Constants {
        #[arg(long)]
        write: Option<PathBuf>,
        #[arg(long, default_value_t = cylflow::hermite::DEFAULT_ORDER)]
        order: usize,
    },
}

fn threads() -> Result<usize> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_VAR} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn simulate(configs: &[PathBuf]) -> Result<bool> {
    let scenarios: Vec<Scenario> = configs
        .iter()
        .map(|p| Scenario::load(p).map_err(|e| Error::Config(format!("{}: {e}", p.display()))))
        .collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads()?)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<scenario::RunReport>> = pool.install(|| scenarios.par_iter().map(scenario::run).collect());
    let mut ok = true;
    for (s, r) in scenarios.iter().zip(results) {
        match r {
            Ok(rep) => {
                let phase = rep
                    .phases
                    .single_phase()
                    .map(|p| p.to_string())
                    .unwrap_or_else(|| "mixed/none".into());
                match &rep.termination {
                    None => println!("{}: reached tau = {}, {} records, phase {phase}", s.name, rep.tau_reached, rep.records),
                    Some(t) => {
                        ok = false;
                        println!("{}: stopped at tau = {} ({t})", s.name, rep.tau_reached);
                    }
                }
                println!("  output in {}", s.output.dir.display());
            }
            Err(e) => {
                ok = false;
                eprintln!("{}: {e}", s.name);
            }
        }
    }
    Ok(ok)
}

fn modes(snapshot: &Path, lambda: f64, r: f64, eta: f64, eps: f64) -> Result<()> {
    let state = RadialGraphState::load_binary(snapshot)?;
    let cfg = TrackerConfig {
        lambda,
        eta,
        eps,
        r_star: r.min(4.0),
        radius: RadiusPolicy::Fixed { r },
        ..Default::default()
    };
    cfg.validate()?;
    let up = tracker::u_plus(&state, r, &cfg)?;
    let um = tracker::u_minus(&state, r, &cfg)?;
    let coeffs: Vec<(String, f64)> = up.iter().map(|(m, c)| (m.to_string(), c)).collect();
    let out = serde_json::json!({
        "tau": state.tau,
        "R": r,
        "lambda": lambda,
        "Uplus": coeffs,
        "Upp_norm": up.filter(|m| m.degree() <= 2).norm(),
        "Uminus": um,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn cstar_for(spec: &MatrixSpec) -> Result<f64> {
    Ok(DerivedConstants::derive(&spec.dims()?)?.cstar)
}

fn print_trajectory(tr: &quadratic_mode::SpectralTrajectory) {
    let k = tr.frame.nrows();
    let head: Vec<String> = (0..k).map(|i| format!("lambda{}", i + 1)).collect();
    println!("tau,{}", head.join(","));
    for (t, l) in tr.tau.iter().zip(&tr.lambdas) {
        let vals: Vec<String> = l.iter().map(|v| format!("{v:.16e}")).collect();
        println!("{t:.16e},{}", vals.join(","));
    }
    if let Some(t) = tr.blowup {
        eprintln!("blow-up guard reached after tau = {t}");
    }
}

fn matrix_ode(file: &Path) -> Result<()> {
    let spec = MatrixSpec::load(file)?;
    let h = BarU::new(&spec.matrix()?, spec.tau0, cstar_for(&spec)?)?;
    let times = spec.sample_times(spec.tau0);
    print_trajectory(&h.integrate(spec.tau1, Output::At(&times))?);
    Ok(())
}

fn q_invariant(file: &Path) -> Result<()> {
    let spec = MatrixSpec::load(file)?;
    let cstar = cstar_for(&spec)?;
    let h = BarU::new(&spec.matrix()?, spec.tau0, cstar)?;
    let q = quadratic_mode::q_invariant(&h)?;
    let fit = if h.is_zero() || spec.tau1 >= -1e3 {
        None
    } else {
        let tr = h.integrate(spec.tau1, Output::At(&spec.sample_times(spec.tau0.min(-10.0))))?;
        quadratic_mode::fit_asymptotics(&tr, -1e3).ok()
    };
    println!("{}", QReport::new(&q, cstar, fit.as_ref()).to_json()?);
    Ok(())
}

fn q_inverse(file: &Path) -> Result<()> {
    let spec = MatrixSpec::load(file)?;
    let cstar = cstar_for(&spec)?;
    let h = quadratic_mode::q_inverse(&spec.matrix()?, cstar)?;
    let u = cylflow::SymMatrixK::from_spectral(&h.frame, &h.lambda_ref);
    eprintln!(
        "anchor tau = {}, U = {:?}, c = {}",
        h.tau_ref,
        u.to_rows(),
        taylor::threshold_c(cstar)
    );
    if !h.is_zero() {
        let times = spec.sample_times(h.tau_ref);
        print_trajectory(&h.integrate(spec.tau1, Output::At(&times))?);
    }
    Ok(())
}

fn run_verify(suite: &str, seed: u64, out: Option<&Path>) -> Result<bool> {
    let suite: Suite = suite.parse()?;
    let rep = verify::run_suite(suite, seed);
    for c in &rep.checks {
        println!("{c}");
    }
    if let Some(p) = out {
        std::fs::write(p, serde_json::to_vec_pretty(&rep)?)?;
    }
    Ok(rep.passed())
}

fn constants(write: Option<&Path>, order: usize) -> Result<()> {
    let table = taylor::generate_constants(order)?.to_toml();
    match write {
        Some(p) => std::fs::write(p, table)?,
        None => print!("{table}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Simulate { configs } => simulate(configs),
        Cmd::Modes { snapshot, lambda, r, eta, eps } => modes(snapshot, *lambda, *r, *eta, *eps).map(|_| true),
        Cmd::MatrixOde { file } => matrix_ode(file).map(|_| true),
        Cmd::QInvariant { config } => q_invariant(config).map(|_| true),
        Cmd::QInverse { file } => q_inverse(file).map(|_| true),
        Cmd::Verify { suite, rng_seed, out } => run_verify(suite, *rng_seed, out.as_deref()),
        Cmd::Constants { write, order } => constants(write.as_deref(), *order).map(|_| true),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
