//! Finite-element Helmholtz solver for exterior scattering in which the
//! outer-boundary data is chosen by minimizing a volume radiation functional.

pub mod analysis;
pub mod cgm;
pub mod error;
pub mod exact;
pub mod export;
pub mod fem;
pub mod functional;
pub mod mesh;
pub mod quadrature;
pub mod refraction;
pub mod special;

pub use error::{Error, Result};
