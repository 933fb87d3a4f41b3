//! Pseudospectral simulator and analysis harness for the (1+3)-dimensional
//! massive Maxwell-Dirac system in the Lorenz gauge.
//!
//! The crate evolves the coupled spinor / gauge-potential fields on a periodic
//! box with exact linear propagators in Fourier space, and provides the
//! diagnostic machinery around that evolution: Dirac projection algebra,
//! Littlewood-Paley decompositions, phase-interaction resonance scans,
//! scattering norms, vector-field commutator checks, and the explicit
//! low-frequency phase correction that quantifies modified scattering of the
//! spinor against linear scattering of the gauge field.

pub mod cli;
pub mod config;
pub mod dirac;
pub mod error;
pub mod evolve;
pub mod fft;
pub mod field;
pub mod grid;
pub mod io;
pub mod lp;
pub mod resonance;
pub mod scattering;
pub mod state;
pub mod vfields;

pub use error::MdError;
pub use grid::FourierGrid;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, MdError>;
