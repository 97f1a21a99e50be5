//! Error types shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by lattice, sampler and patch-statistics operations.
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("lattice side must be at least 5, got {0}")]
    SideTooSmall(usize),
    #[error("neighborhood order must be 1, 2 or 3, got {0}")]
    InvalidOrder(u8),
    #[error("sigma_sq must be positive and finite, got {0}")]
    NonPositiveVariance(f64),
    #[error("beta must be non-negative and finite, got {0}")]
    InvalidBeta(f64),
    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),
    #[error("proposal_std must be positive and finite, got {0}")]
    InvalidProposalStd(f64),
    #[error("operation requires a second-order neighborhood (delta = 8), got order {0}")]
    RequiresSecondOrder(u8),
    #[error("value count {got} does not match lattice size {expected}")]
    SizeMismatch { expected: usize, got: usize },
}

/// Errors raised by the fundamental-form and curvature operations.
#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("sigma_sq must be positive and finite, got {0}")]
    NonPositiveVariance(f64),
    #[error("first fundamental form is numerically singular and no ridge was supplied")]
    SingularFirstForm,
    #[error("ridge must be non-negative and finite, got {0}")]
    InvalidRidge(f64),
    #[error("shape operator has complex eigenvalues (imaginary residual {0:.3e})")]
    ComplexEigenvalues(f64),
}

/// Errors raised by the Monte Carlo / brute-force oracles.
#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("cov9 must be symmetric positive definite (Cholesky failed)")]
    NotPositiveDefinite,
    #[error("at least {min} draws required, got {got}")]
    TooFewDraws { min: usize, got: usize },
    #[error("materialized Kronecker product would have {got} entries (cap {cap})")]
    KroneckerTooLarge { got: usize, cap: usize },
}

/// Errors raised while running a beta cycle.
#[derive(Debug, Error)]
pub enum CycleError {
    #[error("invalid cycle config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Errors raised while parsing a run configuration file.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {path}: {source}")]
    Missing {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config file line {line}: malformed value {value:?} for key {key:?}: {reason}")]
    MalformedValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("config file line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("config file line {line}: expected `key = value`, got {text:?}")]
    MalformedLine { line: usize, text: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Errors raised by the binary lattice snapshot format.
#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("snapshot {path}: bad magic (expected \"GMRF\")")]
    BadMagic { path: PathBuf },
    #[error("snapshot {path}: unsupported version {version}")]
    BadVersion { path: PathBuf, version: u8 },
    #[error("snapshot {path}: side {side} is invalid or truncated payload")]
    BadPayload { path: PathBuf, side: u32 },
    #[error(transparent)]
    Model(#[from] ModelError),
}
