use thiserror::Error;

use crate::attacks::AttackError;
use crate::data::ConstructionError;
use crate::io::FormatError;
use crate::linalg::LinalgError;
use crate::lp::LpError;
use crate::mechanisms::MechanismError;
use crate::queries::QueryError;

/// Crate-level error; every module error converts into it.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
