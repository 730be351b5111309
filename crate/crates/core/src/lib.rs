//! Wick polynomials and cumulants over abstract moment sources, and the
//! cumulant hierarchy of evolution equations written in Wick form.
//!
//! Random variables are opaque [`Var`] identifiers; all probabilistic input
//! comes through [`MomentOracle`] or [`CumulantSource`]. Index sequences are
//! [`LabeledSeq`]s so that repeated variables stay distinguishable.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod cumulants;
pub mod error;
pub mod hierarchy;
pub mod indexing;
pub mod partition_sum;
pub mod poly;
pub mod quadrature;
pub mod wick;

pub use cumulants::{
    cumulants_from_moments, empirical_cumulant, moments_from_cumulants, CumulantSource, CumulantTable, Estimate,
    GaussianOracle, MomentOracle, OracleCumulants, Provenance, SampleMatrix, Substitution,
};
pub use error::{Error, Result};
pub use hierarchy::{hierarchy_rhs, AmplitudeModel, Amplitude, HierarchyState};
pub use indexing::{Key, Label, LabeledSeq, Mask, Partition, Var};
pub use num_complex::Complex64;
pub use poly::Polynomial;
pub use wick::{wick_cumulant_expansion, wick_from_cumulants, wick_recursion_step, wick_recursive, WickPoly};
