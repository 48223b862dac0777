//! Convex polytopes in low dimension: hulls, membership, slices and clipping.

mod dd;
mod hull;
pub(crate) mod linalg;
mod polytope;

pub use hull::{affine_dimension, convex_hull, convex_hull_with};
pub use polytope::{Carrier, Halfspace, Polytope};

/// Numerical tolerances for hull construction and membership.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryConfig {
    /// Relative tolerance, scaled by the largest coordinate magnitude.
    pub tol: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { tol: 1e-9 }
    }
}

/// Default relative tolerance used throughout the crate.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("point {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, got: usize, expected: usize },
    #[error("non-finite coordinate in input")]
    NonFinite,
    #[error("operation undefined on an empty polytope")]
    Empty,
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("anchor lies outside the polytope")]
    AnchorOutside,
    #[error("matrix is not orthonormal")]
    NotOrthonormal,
    #[error("constraint system is unbounded or degenerate")]
    Unbounded,
    #[error("inconsistent polytope data: {0}")]
    Inconsistent(&'static str),
}
