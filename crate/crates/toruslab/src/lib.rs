//! Torus shuffle toolkit.
//!
//! Simulates the lazy torus shuffle (cyclically rotating rows and columns of
//! an `n x n` grid of tiles) together with the machinery needed to study its
//! mixing behavior at desk scale: exact permutation algebra on the grid,
//! finite-distribution entropy tools, coupled tile processes with martingale
//! diagnostics, enumeration-based oracles for tiny instances, and parallel
//! Monte Carlo estimators with confidence intervals.

pub mod coupling;
pub mod entropy;
pub mod grid;
pub mod mc;
pub mod oracle;
pub mod shuffle;
pub mod stream;

use thiserror::Error;

/// Errors surfaced by the library's fallible operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate ({x}, {y}) out of range for side length {n}")]
    CoordOutOfRange { x: usize, y: usize, n: usize },
    #[error("label {label} out of range for side length {n}")]
    LabelOutOfRange { label: usize, n: usize },
    #[error("grid size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("expected a rotation move, got Hold")]
    HoldNotAllowed,
    #[error("tiles must be distinct")]
    DuplicateTiles,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("instance too large: {0}")]
    ResourceLimit(String),
    #[error("relative entropy is infinite: mass {mass} at index {index} where reference is zero")]
    InfiniteDivergence { index: usize, mass: f64 },
    #[error("relative entropy of the input is zero; ratio undefined")]
    ZeroEntropy,
    #[error("box side {side} is below one cell")]
    DegenerateBox { side: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
