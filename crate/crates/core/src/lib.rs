//! Bound states in the continuum for multiband one-dimensional Hamiltonians.
//!
//! The crate covers band-structure poles, closed-form delta-potential states,
//! real-space Green's functions, a discretized Lippmann-Schwinger solver,
//! a Fourier/tail BIC criterion and a finite-difference diagonalization oracle.

pub mod bic;
pub mod delta;
pub mod error;
pub mod green;
pub mod grid;
pub mod linalg;
pub mod lippmann;
pub mod oracle;
pub mod potential;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Grid, SpinorField};
pub use linalg::{c64, CMat};
pub use potential::{Coupling, PotentialSpec};
pub use spectral::{BandModel, EnergyRegion, PoleLabel, PoleSet, RegionTag};
pub use bic::{BicReport, Tolerances, Verdict};
pub use oracle::{FdHamiltonian, LocalizationMetrics};
