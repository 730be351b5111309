//! Lattice nonlinear Schrödinger ensembles, kinetic collision operators and
//! file formats on top of `wickkin-core`.

pub mod cli;
pub mod config;
pub mod dnls;
pub mod error;
pub mod io;
pub mod kinetic;
pub mod lattice;
pub mod stats;

pub use error::{Error, Result};
pub use wickkin_core as core;
