//! Numerical toolkit for the Kähler-angle geometry of immersed parametric
//! surfaces in C^2: fundamental forms, the Lagrangian angle and Maslov
//! winding numbers, drift-Laplacian calculus with Gaussian-weighted
//! quadrature, a pointwise identity suite, and a critical-point search for
//! self-shrinkers of the mean curvature flow.
//!
//! The derivative engine is an exact order-3 jet arithmetic ([`jet`]);
//! every geometric quantity up to the drift Laplacian of `cos(theta)` is
//! assembled from jets, so residuals on closed-form surfaces sit at
//! round-off rather than at a discretisation scale.

pub mod analysis;
pub mod calculus;
pub mod catalog;
pub mod cli;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod identities;
pub mod jet;
pub mod lagrangian;
pub mod shrinker;

pub use error::{Error, Result};
