//! Numerical building blocks: band solvers, quadrature, stable special functions.

pub mod band;
pub mod quadrature;
pub mod special;

pub use band::{gth_null_vector, BandLu, BandMatrix};
pub use quadrature::{integrate, trapezoid};
