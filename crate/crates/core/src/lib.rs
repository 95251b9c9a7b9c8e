//! Numerical potential theory for isotropic α-stable processes on R^d.
//!
//! The crate evaluates exit laws and Green functions, estimates capacities
//! with linear programming, checks the structural conditions that drive
//! scale-invariant Harnack inequalities, computes the explicit Harnack
//! constant together with its radius chain, and metrizes the intrinsic
//! quasi-metric of a normalized Green kernel on point clouds.

pub mod capacity;
pub mod conditions;
pub mod error;
pub mod exit_measures;
pub mod geometry;
pub mod harnack;
pub mod intrinsic;
pub mod kernels;
pub mod quad;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{Ball, Point};
pub use kernels::StableParams;
pub use quad::QuadratureSpec;
