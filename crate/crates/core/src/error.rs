use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("raster geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("expected {expected} band(s), found {found}")]
    BandCount { expected: usize, found: usize },
    #[error("extent {width}x{height} m is smaller than one {side} m tile")]
    ExtentTooSmall { width: f64, height: f64, side: f64 },
    #[error("could not place {requested} non-overlapping tiles (placed {placed})")]
    TilePlacement { requested: usize, placed: usize },
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("duplicate building id {0:?}")]
    DuplicateId(String),
    #[error("footprint does not intersect the raster extent")]
    NoIntersection,
    #[error("patch must be square, got {width}x{height}")]
    NotSquare { width: usize, height: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("region quota infeasible for classes {0:?}")]
    InfeasibleRegionQuota(Vec<String>),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("row identifiers are not aligned at row {row}: {left:?} vs {right:?}")]
    IdMismatch { row: usize, left: String, right: String },
    #[error("row {row} is not a probability distribution: {reason}")]
    InvalidDistribution { row: usize, reason: String },
    #[error("class {class} has {count} sample(s), fewer than {folds} folds")]
    TooFewPerClass { class: usize, count: usize, folds: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
