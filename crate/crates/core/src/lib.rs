//! Exact-diagonalization laboratory for interacting spinless fermions on a
//! tilted, disordered chain.
//!
//! The pipeline is: [`fock`] basis → [`model`] Hamiltonian for one disorder
//! realization → [`spectra`] eigenpairs near a target energy density and gap
//! ratios → [`entanglement`] half-chain entropies → [`ensemble`] averages over
//! realizations on an (L, ε, F) grid → [`collapse`] finite-size-scaling fits of
//! the critical field.

pub mod cli;
pub mod collapse;
pub mod ensemble;
pub mod entanglement;
pub mod error;
pub mod fock;
pub mod model;
pub mod par;
pub mod spectra;

pub use error::{Error, Result};
