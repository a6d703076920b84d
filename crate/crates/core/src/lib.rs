pub mod convergence;
pub mod error;
pub mod hamiltonian;
pub mod integrator;
pub mod nlsolve;
pub mod polybasis;
pub mod splitting;
pub mod tableau;

pub use error::{Error, Result};
pub use nalgebra;
