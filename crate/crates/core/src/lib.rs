//! Numerical laboratory for resonance overlap in two near-integrable
//! Hamiltonian families with one and a half degrees of freedom.

pub mod cli;
pub mod error;
pub mod fixedpoints;
pub mod integrate;
pub mod io;
pub mod linalg;
pub mod manifolds;
pub mod melnikov;
pub mod models;
pub mod regimes;
mod roots;

pub use error::{Error, Result};
pub use integrate::{IntegratorConfig, Trajectory};
pub use linalg::Mat2;
pub use models::{Coupling, Family, ModelSpec, Perturbation, PhaseState};
