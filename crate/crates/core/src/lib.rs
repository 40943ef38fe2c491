//! Hybrid neural representations for fields on the sphere.
//!
//! A field is modelled as `MLP(Z(x))` where `Z(x)` concatenates features
//! bilinearly interpolated from a stack of learnable grids. Two grid
//! geometries are provided: an equirectangular lattice (pole-merged and
//! meridian-periodic) for latitude/longitude gridded data, and a HEALPix
//! ring grid for equal-area pixelized data. Closed-form baseline encodings,
//! latitude-weighted metrics, task drivers and file formats complete the
//! toolkit.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod data_io;
pub mod equirect;
mod error;
mod float;
pub mod healpix;
pub mod interp;
pub mod metrics;
pub mod nn;
pub mod sphere;
pub mod tasks;

pub use error::{Error, Result};
pub use float::Real;
pub use sphere::SphericalPoint;
