//! Numerical laboratory for rescaled mean curvature flow near round cylinders
//! `R^k x S^{n-k}`: Hermite mode algebra, Taylor projections of the graph
//! equation, a method-of-lines solver, localized mode tracking, and the
//! leading-mode ODE systems with their asymptotic invariants.

pub mod error;
pub mod hermite;
pub mod linear_mode;
pub mod ode;
pub mod pde;
pub mod quadratic_mode;
pub mod scenario;
pub mod symmetric;
pub mod taylor;
pub mod tracker;
pub mod verify;

pub use error::{Error, Result};
pub use hermite::{Dimensions, ModeVector, MultiIndex, QuadratureRule};
pub use symmetric::SymMatrixK;
