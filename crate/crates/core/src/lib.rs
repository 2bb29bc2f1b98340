//! Stationary molecular-motor Fokker–Planck systems at small diffusion.
//!
//! The crate assembles an exponentially fitted finite-volume discretization of
//!
//! ```text
//! −σ n_i″ − (ψ_i′ n_i)′ + ν_ii n_i = Σ_{j≠i} ν_ij n_j   on (0, 1),
//! σ n_i′ + ψ_i′ n_i = 0                              at x = 0, 1,
//! ```
//!
//! computes its positive steady state either directly or through the phase
//! functions `R_i = −σ ln n_i`, and compares the result with the
//! Hamilton–Jacobi limits of `R_i` as `σ → 0`.

// `!(a > b)` is used on purpose so NaN lands on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod discretize;
pub mod error;
pub mod hj_limit;
pub mod model;
pub mod numerics;
pub mod phase;
pub mod steady;

pub use error::{Error, Result};
