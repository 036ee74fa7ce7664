//! Finite-difference and semi-Lagrangian solvers for stationary
//! Hamilton–Jacobi–Bellman equations posed on two half-spaces glued along
//! the hyperplane `{x_N = 0}`.

pub mod expr;
pub mod fl;
pub mod grid;
pub mod hamiltonian;
pub mod junction;
pub mod random;
pub mod regional;
pub mod scenario;
pub mod verify;
pub mod viscous;

use thiserror::Error;

pub use junction::JunctionError;
pub use scenario::ScenarioError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Junction(#[from] JunctionError),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e}, tolerance {tol:.1e}, recent {tail:?})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
        tail: Vec<f64>,
    },
    #[error("time step {tau} violates the stability bound {bound}")]
    CflViolation { tau: f64, bound: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("viscosity {eta} is below 0.5*h = {}", 0.5 * h)]
    ViscosityUnderResolved { eta: f64, h: f64 },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
