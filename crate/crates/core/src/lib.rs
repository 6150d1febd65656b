//! Numerical laboratory for disordered pinning models with power-law
//! excursion laws.
//!
//! The crate computes quenched and annealed partition functions exactly by
//! log-domain renewal dynamic programming, solves the annealed free-energy
//! fixed point (including the regime where the correlation length overflows
//! `f64`), and implements the good/bad block coarse-graining with its
//! computable free-energy lower bound. The [`harness`] module drives replica
//! experiments and critical-point scans and backs the `pinlab` binary.

pub mod annealed;
pub mod coarse;
pub mod disorder;
pub mod dp;
pub mod error;
pub mod excursion;
pub mod harness;
pub mod logspace;
pub mod quad;
pub mod validate;

pub use error::{PinError, Result};
pub use excursion::{build_law, psi_integral, ExcursionLaw, LawPreset, PhiSpec};
