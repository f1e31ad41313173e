//! Numerical laboratory for the torsion problem `Δu = N` in `Ω`, `u = 0` on
//! `∂Ω`, on star-shaped planar domains.

pub mod analytic;
pub mod error;
pub mod geometry;
pub mod harmonic;
pub mod identities;
pub mod fem;
pub mod mesh;
pub mod numeric;
pub mod stability;
pub mod torsion;

pub use error::{Error, Result};
