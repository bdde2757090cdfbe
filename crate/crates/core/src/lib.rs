//! Null controls for coupled parabolic-elliptic systems on box domains.
//!
//! The numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the double-precision instantiation used by the
//! command-line harness.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod eps_relax;
pub mod error;
pub mod fixed_point;
pub mod galerkin;
pub mod hum;
pub mod linalg;
pub mod mesh;
pub mod pde;
pub mod report;
pub mod scalar;
pub mod weights;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Mesh64 = mesh::SpatialMesh<f64>;
pub type Laplacian64 = mesh::DiscreteLaplacian<f64>;
pub type Region64 = mesh::ControlRegion<f64>;
pub type Coefficients64 = pde::CoefficientSet<f64>;
pub type Trajectory64 = pde::Trajectory<f64>;
pub type Control64 = pde::ControlField<f64>;
