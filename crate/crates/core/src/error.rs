use alloc::string::String;
use alloc::vec::Vec;

use crate::indexing::{Label, Var};

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what}: sequence of length {len} exceeds the enumeration guard {max}")]
    SizeGuard {
        what: &'static str,
        len: usize,
        max: usize,
    },
    #[error("labels must be distinct, label {0} repeats")]
    DuplicateLabel(Label),
    #[error("requested order {needed} exceeds the available order {available}")]
    OrderExceeded { needed: usize, available: usize },
    #[error("no cumulant stored for key {0:?}")]
    MissingCumulant(Vec<Var>),
    #[error("operation requires a nonempty sequence")]
    EmptySequence,
    #[error("covariance is not symmetric at ({0}, {1})")]
    NonSymmetricCovariance(usize, usize),
    #[error("variable {0:?} has no entry in the Gaussian parameters")]
    UnknownVariable(Var),
    #[error("ensemble of size {0} is degenerate, at least 2 realizations are required")]
    DegenerateEnsemble(usize),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("amplitude is not integrable on [{from}, {to}]")]
    NonIntegrable { from: f64, to: f64 },
    #[error("oracle is inconsistent with the requested substitution: {0}")]
    InconsistentOracle(String),
}
