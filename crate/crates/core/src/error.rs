use nalgebra::Complex;
use thiserror::Error;

use crate::regularize::PencilClassification;

/// Errors raised by the realization toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("pencil sE - A is numerically singular at s = {s} (condition estimate {cond:.3e})")]
    SingularPencil { s: Complex<f64>, cond: f64 },

    #[error("descriptor pencil is not regular (det(sE - A) vanishes identically)")]
    NotRegular(PencilClassification),

    #[error("descriptor pencil is regular but has index greater than one")]
    IndexTooHigh(PencilClassification),

    #[error(
        "{what} has condition number {cond:.3e}; the system is close to a singular or high index system"
    )]
    IllConditioned { what: &'static str, cond: f64 },

    #[error("system is not asymptotically stable (spectral abscissa {abscissa:.6e})")]
    NotStable { abscissa: f64 },

    #[error("system is not passive: {0} (the nearest port-Hamiltonian method can still be applied)")]
    NotPassive(String),

    #[error("projected KYP constraint Q B2 = C2^T violated: residual {residual:.3e}")]
    ConstraintViolation { residual: f64 },

    #[error("Riccati solve failed: {0}")]
    Riccati(String),

    #[error("frequency grids differ")]
    GridMismatch,

    #[error("input excitation is rank deficient: regression rank {rank} < {needed} unknowns per channel")]
    RankDeficientExcitation { rank: usize, needed: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("time limit of {limit_s:.0} s exceeded during {stage}")]
    Timeout { stage: String, limit_s: f64 },

    #[error("{stage} stage failed: {error}")]
    Stage { stage: &'static str, error: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
