use thiserror::Error;

use crate::modes::CmAssemblyReport;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("malformed covariance matrix: discriminant {discriminant:e} below tolerance")]
    MalformedCovariance { discriminant: f64 },

    #[error("unphysical state: det(gamma) = {det_gamma} < 1")]
    UnphysicalState { det_gamma: f64 },

    #[error("chemical potential {mu} must lie below mode energy E_{l} = {energy}")]
    InvalidChemicalPotential { mu: f64, l: usize, energy: f64 },

    #[error("degenerate mode: every overlap coefficient of region [{x1}, {x2}] vanishes")]
    DegenerateMode { x1: f64, x2: f64 },

    #[error("invalid mode pair: {0}")]
    InvalidPair(String),

    #[error("cannot orthogonalize: overlap {overlap} is (anti)parallel")]
    CannotOrthogonalize { overlap: f64 },

    #[error("momentum series do not converge (top-hat detection without a momentum window); entries converged = {:?}", .0.series_converged)]
    Divergent(Box<CmAssemblyReport>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("entanglement indicator is not monotone in temperature on bracket [{lo}, {hi}]")]
    NonMonotone { lo: f64, hi: f64 },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidInput(_)
            | Error::Domain(_)
            | Error::InvalidChemicalPotential { .. }
            | Error::InvalidPair(_) => ErrorClass::Validation,
            _ => ErrorClass::Numerical,
        }
    }

    /// Short stable token used in CSV flag columns.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Domain(_) => "domain",
            Error::MalformedCovariance { .. } => "malformed_cm",
            Error::UnphysicalState { .. } => "unphysical_state",
            Error::InvalidChemicalPotential { .. } => "invalid_chemical_potential",
            Error::DegenerateMode { .. } => "degenerate_mode",
            Error::InvalidPair(_) => "invalid_pair",
            Error::CannotOrthogonalize { .. } => "cannot_orthogonalize",
            Error::Divergent(_) => "divergent",
            Error::Numerical(_) => "numerical",
            Error::NonMonotone { .. } => "non_monotone",
        }
    }
}
