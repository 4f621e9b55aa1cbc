use thiserror::Error;

/// Errors raised by the numerical kernels. Every variant names the module it
/// came from so that end-to-end runs report module-tagged diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("hermite: {0}")]
    Hermite(String),
    #[error("taylor: {0}")]
    Taylor(String),
    #[error("pde: geometric degeneration (1 + u = {value:.6e} at x = {x:?}, tau = {tau})")]
    Degenerate { x: Vec<f64>, value: f64, tau: f64 },
    #[error("pde: blow-up guard tripped at tau = {tau} (|u| + |grad u| = {size:.6e})")]
    BlowUp { tau: f64, size: f64 },
    #[error("pde: {0}")]
    Pde(String),
    #[error("tracker: {0}")]
    Tracker(String),
    #[error("linear_mode: {0}")]
    Linear(String),
    #[error("quadratic_mode: {0}")]
    Quadratic(String),
    #[error("ode: {0}")]
    Ode(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
