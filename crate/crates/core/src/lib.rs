//! Energy-driven autoencoder solver for thin (Kirchhoff) plates.
//!
//! A small fully connected network `w(x; θ)` approximates the deflection,
//! vibration mode or buckling mode of a plate. Its parameters are found by
//! minimising the total potential energy (bending), the Rayleigh quotient
//! (vibration) or the load-factor quotient (buckling), each integrated by
//! Monte-Carlo quadrature and augmented with penalties on the essential
//! boundary conditions. Spatial derivatives up to second order are carried
//! exactly as 2-jets; parameter gradients come from a reverse sweep over the
//! recorded forward pass. Training is full-batch L-BFGS.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod config;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod network;
pub mod objective;
pub mod optimizer;
pub mod oracles;
pub mod parallel;
pub mod plate;
pub mod runner;
pub mod validate;

pub use error::{Error, Result};
