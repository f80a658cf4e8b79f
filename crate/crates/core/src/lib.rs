//! Rates, master equations, stochastic trajectories and coupling
//! calculators for phonon-number QND measurement in quadratically coupled
//! optomechanical cavities.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity_response;
pub mod coupling;
pub mod error;
pub mod fock;
pub mod lindblad;
pub mod rates;
pub mod system;
pub mod trajectories;
pub mod twomode;

pub use error::{Error, Result};
