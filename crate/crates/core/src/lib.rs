//! Simulation and kernel-learning toolkit for a Kerr-nonlinear qubit
//! coupled to multimode bulk acoustic resonators.

pub mod bench;
pub mod cli;
pub mod dynamics;
pub mod entangle;
pub mod error;
pub mod hilbert;
pub mod kernel;
pub mod linalg;
pub mod ml;
pub mod model;
pub mod qinfo;

pub use error::{Error, Result};
