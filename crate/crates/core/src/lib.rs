//! Numerical toolkit for s-parabolic capacities.

pub mod cantor;
pub mod capacity;
pub mod error;
pub mod interp;
pub mod kernels;
pub mod lp;
pub mod measures;
pub mod potentials;
pub mod psgeo;
pub mod quad;
pub mod special;
