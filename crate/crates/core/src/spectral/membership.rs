//! Per-column membership: how strongly each column follows the principal
//! component series.

use super::eigen::EigenResult;
use super::matrix::{dot, norm};
use crate::corrmat::{SignMode, Standardized};
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    /// `|corr(x_i, t)|` for every column, in `[0, 1]`.
    pub scores: Vec<f64>,
    /// The component series had zero variance; every score is 0.
    pub degenerate: bool,
}

/// Principal component series `t` built from the standardized columns of the
/// matrix the eigenpair was computed on, normalized to unit length.
///
/// Columns are combined as `sum_i s_i v_i z_i`. In the sign-folding modes the
/// correlation matrix discards signs, so `s_i` restores them relative to the
/// column with the largest loading; otherwise anti-correlated members would
/// cancel out of `t`. Returns `None` when `t` vanishes.
pub fn component_series(z: &Standardized, eig: &EigenResult, mode: SignMode) -> Result<Option<Vec<f64>>> {
    let n = z.n_cols();
    if eig.v1.len() != n {
        return Err(Error::contract(format!(
            "eigenvector has {} entries for {n} columns",
            eig.v1.len()
        )));
    }
    let m = z.n_rows();
    let anchor = eig
        .v1
        .iter()
        .enumerate()
        .fold(0, |best, (i, x)| if *x > eig.v1[best] { i } else { best });
    let mut t = vec![0.0; m];
    for (i, &w) in eig.v1.iter().enumerate() {
        let zi = z.column(i);
        let sign = match mode {
            SignMode::PositiveOnly => 1.0,
            SignMode::Absolute | SignMode::NegativeOnly => {
                if dot(zi, z.column(anchor)) < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            }
        };
        let c = sign * w;
        t.iter_mut().zip(zi).for_each(|(a, b)| *a += c * b);
    }
    let len = norm(&t);
    if len <= 1e-12 {
        return Ok(None);
    }
    t.iter_mut().for_each(|x| *x /= len);
    Ok(Some(t))
}

/// `|corr(z_i, t)|` for every column of `z`. `t` must be centered and unit length.
pub fn correlation_with(z: &Standardized, t: &[f64]) -> Vec<f64> {
    crate::par::map_range(z.n_cols(), |i| dot(z.column(i), t).abs().min(1.0))
}

/// Membership scores of the columns of `x` against the principal component of
/// its own correlation matrix.
pub fn membership_scores(x: &FeatureMatrix, eig: &EigenResult, mode: SignMode) -> Result<Membership> {
    let z = Standardized::from_matrix(x);
    Ok(match component_series(&z, eig, mode)? {
        Some(t) => Membership {
            scores: correlation_with(&z, &t),
            degenerate: false,
        },
        None => Membership {
            scores: vec![0.0; x.n_cols()],
            degenerate: true,
        },
    })
}
