//! Resonance shifts at the avoided crossings of a two-level system coupled to a
//! harmonic oscillator.
//!
//! The crate builds truncated Hamiltonians ([`fock`], [`models`]), scans dressed
//! spectra for the structural resonance ([`spectra`]), evaluates the
//! level-shift operator and the implicit two-level effective Hamiltonian
//! ([`effective`]), and propagates states exactly to locate the dynamical
//! resonance and quantify trapped-ion gate errors ([`dynamics`]).
//!
//! All energies are in units of the trap frequency, with `hbar = 1`.

pub mod cli;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod fock;
pub mod models;
pub mod report;
pub mod search;
pub mod spectra;

pub use error::{Error, Result};
pub use fock::{BasisIndex, EigenDecomposition, HermitianOperator, Spin};
pub use models::{ModelKind, ModelSpec, Partition, OMEGA_T};
