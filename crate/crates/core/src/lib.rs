//! Symmetry-reduced semiclassical trace formulas.
//!
//! Compares the smoothed, symmetry-sector-restricted spectral density of a
//! Schrödinger operator `-h²Δ + V` with its semiclassical prediction: a Weyl
//! term over the fixed-point sets of the group elements plus an oscillating
//! sum over `g`-periodic classical orbits.
//!
//! Modules, bottom-up:
//! - [`symgroup`]: finite orthogonal groups, characters, symplectic lift
//! - [`models`]: invariant potentials
//! - [`qspec`]: finite-difference spectra and sector classification
//! - [`cdyn`]: Hamiltonian flow, twisted periodic orbits, Maslov indices
//! - [`trace`]: Weyl and oscillating terms, reduced sum
//! - [`harness`]: configuration, runs, artifacts, CLI plumbing

pub mod cdyn;
pub mod error;
pub mod harness;
pub mod models;
pub mod par;
pub mod qspec;
pub mod symgroup;
pub mod trace;

pub use error::{Error, Result};
pub use par::Execution;
