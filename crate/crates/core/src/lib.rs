//! Numerical reproduction of the EPR two-particle correlations and of the
//! movable double-slit diaphragm variant.
//!
//! * [`lattice`]: periodic grids, regularized deltas, position/momentum transform
//! * [`states`]: EPR and particle-particle-diaphragm tensor states
//! * [`measurement`]: postselection, densities, ridge fits, total variation
//! * [`protocols`]: end-to-end scenarios and their reports
//! * [`doppler`]: photon/mirror collision used as a momentum readout
//! * [`cli`]: config parsing, scenario execution and CSV/JSON export

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod doppler;
pub mod error;
pub mod lattice;
pub mod measurement;
pub mod protocols;
pub mod states;

pub use error::{Error, Result};
pub use lattice::{make_grid, Grid1D, Rep};
