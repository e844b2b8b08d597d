//! Crate-wide error type.

use crate::pso::OptimizationResult;

/// Errors produced by any umbra operation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image decode error: {0}")]
    Decode(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),

    #[error("mask is {mask_w}x{mask_h} but image is {img_w}x{img_h}")]
    DimensionMismatch {
        mask_w: usize,
        mask_h: usize,
        img_w: usize,
        img_h: usize,
    },

    #[error("region is empty")]
    EmptyRegion,

    #[error("clean region has zero mean lightness; shadow ratio is undefined")]
    ZeroLightness,

    #[error("invalid bounds at dimension {dim}: [{lo}, {hi}]")]
    InvalidBounds { dim: usize, lo: f64, hi: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shadow coefficient not resolved; measure k before attacking")]
    UnresolvedK,

    #[error("query budget of {budget} exhausted")]
    BudgetExhausted { budget: u64 },

    #[error("optimization aborted after {} evaluations: {source}", partial.evaluations_used)]
    PsoAborted {
        partial: OptimizationResult,
        source: Box<Error>,
    },

    #[error("oracle protocol error: {0}")]
    Protocol(String),

    #[error("oracle query timed out after {0:?}")]
    QueryTimeout(std::time::Duration),

    #[error("confidence vector invalid: {0}")]
    InvalidConfidences(String),

    #[error("sun below horizon (elevation {0:.2} deg); no shadow is cast")]
    NoShadow(f64),

    #[error("sun ray is parallel to the sign plane; projection is degenerate")]
    DegenerateProjection,

    #[error("invalid sweep window: {0}")]
    InvalidSweep(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
