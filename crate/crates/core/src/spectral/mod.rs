//! Top eigenpair of a correlation matrix, the principal score derived from it,
//! and per-column membership in the principal component.

mod eigen;
mod matrix;
mod membership;
mod tridiag;

pub use eigen::{top_eigenpair, EigenResult, Method, SolverConfig};
pub use matrix::{dot, norm, SymMatrix};
pub use membership::{component_series, correlation_with, membership_scores, Membership};
pub use tridiag::tridiagonal_eigen;

pub(crate) use matrix::mirror_upper;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalScore {
    /// `lambda1 / n`, in `[0, 1]` for a correlation matrix.
    pub rho: f64,
    pub eigen: EigenResult,
}

/// Principal score of `p`: its top eigenvalue divided by its dimension.
pub fn principal_score(p: &SymMatrix, cfg: &SolverConfig) -> Result<PrincipalScore> {
    let eigen = top_eigenpair(p, cfg)?;
    Ok(PrincipalScore {
        rho: eigen.lambda1 / p.dim() as f64,
        eigen,
    })
}

/// Perron-Frobenius bounds on `lambda1 / n` for a nonnegative matrix:
/// smallest and largest row sum over `n`.
pub fn row_sum_bounds(p: &SymMatrix) -> (f64, f64) {
    let n = p.dim() as f64;
    let sums = p.row_sums();
    let lo = sums.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo / n, hi / n)
}
