//! Quantum imaginary-time evolution (QITE) for max-cut Hamiltonians.
//!
//! The crate simulates QITE with local (LA), extended-local (eLA) and
//! nonlocal (NLA) expansion pools, merges consecutive imaginary-time steps into
//! single exponentials ("compression"), compiles the resulting Pauli rotations
//! into gate lists for resource counts, and replays those circuits under a
//! thermal-relaxation and readout-error noise model.

pub mod circuit;
pub mod cli;
pub mod error;
pub mod graph;
pub mod hamiltonian;
pub mod noise;
pub mod pauli;
pub mod pools;
pub mod qite;
pub mod statevec;

pub use error::{Error, Result};
pub use graph::{Edge, Graph, GraphKind};
pub use hamiltonian::{Hamiltonian, Spectrum, Term};
pub use pauli::{Pauli, PauliString, Phase, PhasedPauli};
pub use pools::{DomainSpec, Method, Pool, Pools};
pub use statevec::StateVector;
