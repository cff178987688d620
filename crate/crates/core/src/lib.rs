//! Statevector emulation of quantum imaginary-time evolution (QITE), the
//! quantum Lanczos method built on its norm ledger, and minimally entangled
//! typical thermal states (QMETTS), together with dense oracles used to check
//! them.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod hamiltonians;
pub mod linalg;
pub mod pauli;
pub mod qite;
pub mod qlanczos;
pub mod qmetts;
pub mod statevector;

pub use error::{Error, Result};
pub use hamiltonians::{Hamiltonian, LocalTerm, ModelSpec};
pub use pauli::{OperatorPool, PauliLetter, PauliString, PauliSum, PoolKind};
pub use qite::{qite_evolve, QiteConfig, Trajectory};
pub use statevector::{Basis, ProductLabel, StateVector};
