//! Soft-edge universality for orthogonal, unitary and symplectic invariant
//! ensembles with polynomial potentials.
//!
//! The crate computes orthonormal polynomial recurrences, equilibrium edge
//! scaling, finite-N correlation kernels, their Airy limits, Fredholm
//! determinants for the largest-eigenvalue distribution and a Metropolis
//! sampler for cross-checks.

pub mod airy;
pub mod convergence;
pub mod equilibrium;
pub mod error;
pub mod fredholm;
pub mod montecarlo;
pub mod orthopoly;
pub mod potential;
pub mod quadrature;
pub mod widom;

pub use equilibrium::EdgeScaling;
pub use error::{Error, Result};
pub use orthopoly::{PhiGrid, RecurrenceTable};
pub use potential::{Beta, Potential};
pub use widom::{EdgeSystem, WidomBlocks};
