//! Error type shared across the crate.

use std::fmt;

/// Everything that can go wrong while building domains, parsing field
/// expressions, or evaluating the integral operators.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Ray direction `x - y` is zero.
    ZeroRayDirection,
    /// A ball of the requested radius fits nowhere inside the domain.
    NoAdmissibleBallPlacement,
    /// Cover adjacency graph is disconnected.
    DisconnectedCover,
    /// No chain connects the requested cover indices.
    NoChainExists,
    /// Cover ordering violates the consecutive-intersection invariant.
    CoverOrderingViolated { index: usize },
    /// The star ball is not contained in the domain shape.
    StarBallNotContained,
    /// A ball radius (or other length scale) must be positive.
    NonPositiveRadius(f64),
    /// Dilation factor for field scaling must exceed 1.
    ScaleNotGreaterThanOne(f64),
    /// Mollification radius exceeds the distance to the domain boundary.
    MollificationMargin {
        point: Vec<f64>,
        needed: f64,
        available: f64,
    },
    /// Homotopy smoothing requires k >= 4.
    SmoothingIndexTooSmall(u32),
    /// Smoothing index below the admissible threshold found by the sweep.
    SmoothingIndexBelowAdmissible { k: u32, k0: u32 },
    /// A homotopy sample left the declared domain.
    HomotopyLeavesDomain { s: f64, t: f64, point: Vec<f64> },
    /// A path sample left the declared domain.
    PathLeavesDomain { s: f64, point: Vec<f64> },
    /// Curl residual of the input field exceeds the admissible tolerance.
    CurlResidualExceeded { residual: f64, tolerance: f64 },
    /// Support of a compactly supported input is not inside the domain.
    SupportNotInsideDomain,
    /// Evaluation point lies outside the operator domain.
    PointOutsideDomain(Vec<f64>),
    /// Finite-difference stencil leaves the valid region.
    StencilOutsideDomain { point: Vec<f64>, axis: usize },
    /// Field evaluation failed at a point.
    EvalFailed { point: Vec<f64>, reason: String },
    /// Grid interpolation outside the lattice box.
    OutsideGrid(Vec<f64>),
    /// Expression parse failure at a byte offset.
    Parse { offset: usize, message: String },
    /// Dimension of a point or field does not match.
    DimensionMismatch { expected: usize, got: usize },
    /// A chain intersection is too small to host a bump.
    IntersectionTooSmall {
        pair: (usize, usize),
        width: f64,
        needed: f64,
    },
    /// A schedule passed to the rough reconstruction is empty.
    EmptySchedule,
    /// Fewer overlap samples than the configured minimum.
    TooFewOverlapSamples {
        pair: (usize, usize),
        got: usize,
        min: usize,
    },
    /// Conjugate gradient did not converge.
    CgDidNotConverge { iterations: usize, residual: f64 },
    /// Operation requires dimension >= 2.
    RequiresDimensionAtLeastTwo,
    /// Grid file I/O or format problem.
    GridFormat(String),
    /// Problem with the workbox geometry for compact-support reconstruction.
    WorkboxMarginTooSmall { margin: f64, needed: f64 },
    /// Quadrature order below the supported minimum.
    QuadratureOrderTooSmall { order: usize, min: usize },
    /// A verification sample of the domain escaped the constructed cover.
    CoverageGap(Vec<f64>),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ZeroRayDirection => write!(f, "zero ray direction"),
            Error::NoAdmissibleBallPlacement => write!(f, "no admissible ball placement"),
            Error::DisconnectedCover => write!(f, "cover adjacency graph is disconnected"),
            Error::NoChainExists => write!(f, "no chain exists"),
            Error::CoverOrderingViolated { index } => {
                write!(f, "cover ordering violated at ball {index}")
            }
            Error::StarBallNotContained => write!(f, "star ball not contained in domain"),
            Error::NonPositiveRadius(r) => write!(f, "radius must be positive, got {r}"),
            Error::ScaleNotGreaterThanOne(l) => write!(f, "scale must exceed 1, got {l}"),
            Error::MollificationMargin { point, needed, available } => write!(
                f,
                "mollification radius exceeds margin at {point:?}: need {needed}, have {available}"
            ),
            Error::SmoothingIndexTooSmall(k) => {
                write!(f, "smoothing index k must be at least 4, got {k}")
            }
            Error::SmoothingIndexBelowAdmissible { k, k0 } => {
                write!(f, "smoothing index {k} below admissible k0 = {k0}")
            }
            Error::HomotopyLeavesDomain { s, t, point } => {
                write!(f, "homotopy leaves domain at (s,t)=({s},{t}), point {point:?}")
            }
            Error::PathLeavesDomain { s, point } => {
                write!(f, "path leaves domain at s={s}, point {point:?}")
            }
            Error::CurlResidualExceeded { residual, tolerance } => {
                write!(f, "curl residual {residual} exceeds tolerance {tolerance}")
            }
            Error::SupportNotInsideDomain => write!(f, "support not compactly inside domain"),
            Error::PointOutsideDomain(p) => write!(f, "point outside domain: {p:?}"),
            Error::StencilOutsideDomain { point, axis } => {
                write!(f, "stencil exits domain at {point:?} along axis {axis}")
            }
            Error::EvalFailed { point, reason } => {
                write!(f, "field evaluation failed at {point:?}: {reason}")
            }
            Error::OutsideGrid(p) => write!(f, "point outside grid lattice: {p:?}"),
            Error::Parse { offset, message } => {
                write!(f, "parse error at offset {offset}: {message}")
            }
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::IntersectionTooSmall { pair, width, needed } => write!(
                f,
                "intersection of balls {} and {} too small for a bump: width {width}, need {needed}",
                pair.0, pair.1
            ),
            Error::EmptySchedule => write!(f, "schedule must not be empty"),
            Error::TooFewOverlapSamples { pair, got, min } => write!(
                f,
                "overlap of balls {} and {} yielded {got} samples, minimum is {min}",
                pair.0, pair.1
            ),
            Error::CgDidNotConverge { iterations, residual } => {
                write!(f, "conjugate gradient did not converge after {iterations} iterations, residual {residual}")
            }
            Error::RequiresDimensionAtLeastTwo => write!(f, "requires n >= 2"),
            Error::GridFormat(msg) => write!(f, "grid file: {msg}"),
            Error::WorkboxMarginTooSmall { margin, needed } => {
                write!(f, "workbox margin {margin} below required {needed}")
            }
            Error::QuadratureOrderTooSmall { order, min } => {
                write!(f, "quadrature order {order} below minimum {min}")
            }
            Error::CoverageGap(p) => write!(f, "cover misses domain sample {p:?}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
