//! Exterior Steklov spectra, capacity, potential tensors and inverse mean
//! curvature flow on closed triangulated surfaces in R³.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod ball;
pub mod bem;
pub mod cli;
pub mod functionals;
pub mod imcf;
pub mod mesh;
pub mod quad;
pub mod report;
pub mod tensors;

pub type Vec3 = nalgebra::Vector3<f64>;
