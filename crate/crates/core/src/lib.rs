//! Numerical laboratory for Bergman densities, balanced metrics and the
//! equivariant obstruction character on the circle-invariant testbed (P¹, O(1)).
//!
//! Everything is written in the moment coordinate `x = |z|²/(1 + |z|²)`, where
//! invariant Kähler potentials are Legendre series and the Fubini–Study
//! Laplacian and Lichnérowicz operator are diagonal.

pub mod bergman;
pub mod corrector;
pub mod equivariant;
pub mod error;
pub mod expansion;
pub mod fit;
pub mod geom;

pub use error::{LabError, Result};
