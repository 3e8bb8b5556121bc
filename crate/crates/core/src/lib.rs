//! Statevector simulation of variational circuits with ancilla post-selection, neural
//! reweighting of ancilla outcomes for thermal states, and the supporting optimizers and oracles.

pub mod ansatz;
pub mod autodiff;
pub mod eigensolver;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod neural;
pub mod objectives;
pub mod optimize;
pub mod parallel;
pub mod statevec;
pub mod thermal;

pub use error::{Result, VpsError};
