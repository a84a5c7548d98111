//! Numerical laboratory for spectra of hyperbolic surfaces built from pants
//! decompositions.

pub mod collar;
pub mod error;
pub mod extremal;
pub mod graphana;
pub mod harness;
pub mod hypgeom;
pub mod linalg;
pub mod mesh;
pub mod pants;
pub mod quad;
pub mod sharpness;
pub mod spectral;
pub mod surfmesh;

pub use error::{Error, Result};
