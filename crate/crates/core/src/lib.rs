//! Simulator for lossy multi-step discrete-time quantum walks.
//!
//! - [`engine`]: coin/walker states, primitive operators, Floquet words.
//! - [`momentum`]: Bloch decomposition, winding numbers, quasienergies,
//!   pseudo-unitarity and phase diagrams of homogeneous walks.
//! - [`dynamics`]: lossy time evolution and its observables.
//! - [`lattice`]: finite periodic rings, dense spectra and edge states.
//! - [`disorder`]: static and dynamic coin-angle disorder ensembles.

pub mod disorder;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod momentum;

pub use error::{Error, Result};
