use alloc::string::String;

use crate::spectrum::Classification;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
    #[error("degenerate: {0}")]
    Degenerate(&'static str),
    #[error("map is not an Anosov endomorphism (classified as {0:?})")]
    NotAnosov(Classification),
    #[error("coordinate change is not a diffeomorphism: sup|Dψ| = {sup_norm:.4} ≥ 1")]
    NotDiffeomorphism { sup_norm: f64 },
    #[error("{what}: no convergence after {steps} steps (residual {residual:.3e})")]
    NonConvergence { what: &'static str, steps: usize, residual: f64 },
    #[error("inverse branches collided (distance {distance:.3e})")]
    BranchCollision { distance: f64 },
    #[error("direction estimate not converged (certificate {certificate:.3e})")]
    NotConverged { certificate: f64 },
    #[error("found {found} periodic points of period {period}, expected {expected}")]
    CountMismatch { period: u32, found: usize, expected: u128 },
    #[error("ill-conditioned {0}")]
    IllConditioned(&'static str),
    #[error("functional-equation residual {residual:.3e} exceeds {tolerance:.1e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },
    #[error("series ratio {ratio:.6} too close to 1")]
    SeriesStall { ratio: f64 },
    #[error("leaf continuation failed: {0}")]
    LeafFailure(&'static str),
    #[error("points are not on a common leaf within the arclength budget")]
    NotOnSameLeaf,
    #[error("Livsic obstruction: orbit of period {period} has sum {value:.3e}")]
    ObstructionViolated { period: u32, value: f64 },
    #[error("domination gap {gap:.4} below 1.05")]
    DominationFailure { gap: f64 },
    #[error("leaf missed the target transversal")]
    LeafMiss,
    #[error("inverting the conjugacy failed near {locus}")]
    InversionFailure { locus: String },
    #[error("inconsistent verdicts: {0}")]
    InconsistentVerdicts(String),
}
