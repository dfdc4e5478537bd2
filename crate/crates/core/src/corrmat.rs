//! Nonnegative correlation matrices over the columns of a window, computed in
//! batch or maintained incrementally across window slides.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;
use crate::par;
use crate::spectral::{dot, SymMatrix};

/// How signed Pearson coefficients are folded into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SignMode {
    /// `|r|`
    #[default]
    Absolute,
    /// `max(r, 0)`
    PositiveOnly,
    /// `max(-r, 0)`
    NegativeOnly,
}

impl SignMode {
    pub fn fold(self, r: f64) -> f64 {
        let v = match self {
            SignMode::Absolute => r.abs(),
            SignMode::PositiveOnly => r.max(0.0),
            SignMode::NegativeOnly => (-r).max(0.0),
        };
        v.clamp(0.0, 1.0)
    }
}

impl std::str::FromStr for SignMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(SignMode::Absolute),
            "positive_only" => Ok(SignMode::PositiveOnly),
            "negative_only" => Ok(SignMode::NegativeOnly),
            other => Err(Error::param(format!("unknown sign mode {other:?}"))),
        }
    }
}

/// Symmetric `n x n` matrix with unit diagonal and entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    matrix: SymMatrix,
    mode: SignMode,
    col_ids: Vec<String>,
}

impl CorrelationMatrix {
    /// Wrap a matrix, checking the unit diagonal and range.
    pub fn new(matrix: SymMatrix, mode: SignMode, col_ids: Vec<String>) -> Result<Self> {
        let n = matrix.dim();
        if col_ids.len() != n {
            return Err(Error::contract("column ids do not match matrix size"));
        }
        for i in 0..n {
            if matrix.get(i, i) != 1.0 {
                return Err(Error::contract(format!("diagonal entry {i} is not 1")));
            }
        }
        if matrix.data().iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::contract("correlation entries must lie in [0, 1]"));
        }
        Ok(CorrelationMatrix { matrix, mode, col_ids })
    }

    pub fn n(&self) -> usize {
        self.matrix.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn mode(&self) -> SignMode {
        self.mode
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    /// Restriction to the given columns.
    pub fn submatrix(&self, idx: &[usize]) -> CorrelationMatrix {
        CorrelationMatrix {
            matrix: self.matrix.submatrix(idx),
            mode: self.mode,
            col_ids: idx.iter().map(|&i| self.col_ids[i].clone()).collect(),
        }
    }
}

/// Deviations from the mean, divided by the largest absolute deviation.
///
/// Dividing by the largest deviation makes the result exactly invariant to
/// scaling the input by any factor that keeps the deviations exact. Returns
/// `None` for a constant vector.
fn scaled_deviations(x: &[f64]) -> Option<Vec<f64>> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let peak = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 || !peak.is_finite() {
        return None;
    }
    d.iter_mut().for_each(|v| *v /= peak);
    Some(d)
}

/// Pearson correlation coefficient; 0 when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::contract(format!(
            "pearson on vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::contract("pearson needs at least two observations"));
    }
    let (Some(dx), Some(dy)) = (scaled_deviations(x), scaled_deviations(y)) else {
        return Ok(0.0);
    };
    let sxy: f64 = dx.iter().zip(&dy).map(|(a, b)| a * b).sum();
    let sxx: f64 = dx.iter().map(|a| a * a).sum();
    let syy: f64 = dy.iter().map(|b| b * b).sum();
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Columns centered and scaled to unit Euclidean length, so the Pearson
/// coefficient of two columns is their dot product. Constant columns are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Standardized {
    pub fn from_matrix(x: &FeatureMatrix) -> Self {
        let m = x.n_rows();
        let cols = par::map_range(x.n_cols(), |j| standardize(x.column(j)));
        Standardized {
            rows: m,
            cols: x.n_cols(),
            data: cols.concat(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }
}

/// Center and scale to unit length; a constant vector maps to zeros.
pub fn standardize(x: &[f64]) -> Vec<f64> {
    match scaled_deviations(x) {
        Some(mut d) => {
            let len = dot(&d, &d).sqrt();
            d.iter_mut().for_each(|v| *v /= len);
            d
        }
        None => vec![0.0; x.len()],
    }
}

/// Pairwise folded correlations of the columns of `x`, diagonal 1.
pub fn build_correlation_matrix(x: &FeatureMatrix, mode: SignMode) -> Result<CorrelationMatrix> {
    if x.n_cols() < 1 {
        return Err(Error::contract("correlation matrix needs at least one column"));
    }
    if x.n_rows() < 2 {
        return Err(Error::contract("correlation needs at least two rows"));
    }
    let z = Standardized::from_matrix(x);
    let matrix = SymMatrix::from_upper(x.n_cols(), 1.0, |i, j| mode.fold(dot(z.column(i), z.column(j))));
    Ok(CorrelationMatrix {
        matrix,
        mode,
        col_ids: x.col_ids().to_vec(),
    })
}

/// Shifted sufficient statistics for every column and column pair.
///
/// Each column keeps a fixed shift `c_j` (its first observed value) and the
/// sums run over `x - c_j`, which keeps the variance formula well conditioned.
#[derive(Debug, Clone, PartialEq)]
pub struct PairStats {
    count: usize,
    shift: Vec<f64>,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    /// Row-major `n x n` cross products; only `j < k` is maintained.
    cross: Vec<f64>,
}

impl PairStats {
    pub fn from_matrix(x: &FeatureMatrix) -> Self {
        let n = x.n_cols();
        let shift: Vec<f64> = (0..n).map(|j| x.column(j).first().copied().unwrap_or(0.0)).collect();
        let dev: Vec<Vec<f64>> = (0..n)
            .map(|j| x.column(j).iter().map(|v| v - shift[j]).collect())
            .collect();
        let sum = dev.iter().map(|d| d.iter().sum()).collect();
        let sumsq = dev.iter().map(|d| dot(d, d)).collect();
        let mut cross = vec![0.0; n * n];
        par::for_each_row_mut(&mut cross, n.max(1), |j, row| {
            for k in j + 1..n {
                row[k] = dot(&dev[j], &dev[k]);
            }
        });
        PairStats {
            count: x.n_rows(),
            shift,
            sum,
            sumsq,
            cross,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn n_cols(&self) -> usize {
        self.shift.len()
    }

    /// Signed Pearson coefficient of columns `j` and `k`.
    pub fn correlation(&self, j: usize, k: usize) -> f64 {
        if j == k {
            return 1.0;
        }
        let (j, k) = if j < k { (j, k) } else { (k, j) };
        let m = self.count as f64;
        let vj = self.variance_sum(j);
        let vk = self.variance_sum(k);
        if vj == 0.0 || vk == 0.0 {
            return 0.0;
        }
        let cov = self.cross[j * self.n_cols() + k] - self.sum[j] * self.sum[k] / m;
        (cov / (vj * vk).sqrt()).clamp(-1.0, 1.0)
    }

    /// `sum (x - mean)^2`, with round-off noise on constant columns snapped to 0.
    fn variance_sum(&self, j: usize) -> f64 {
        let m = self.count as f64;
        let v = self.sumsq[j] - self.sum[j] * self.sum[j] / m;
        if v <= 1e-12 * self.sumsq[j] {
            0.0
        } else {
            v
        }
    }

    /// Add (`sign = 1`) or remove (`sign = -1`) one observation row.
    fn apply_row(&mut self, values: &[f64], sign: f64) {
        let n = self.n_cols();
        let dev: Vec<f64> = values.iter().zip(&self.shift).map(|(v, c)| v - c).collect();
        for ((s, q), d) in self.sum.iter_mut().zip(&mut self.sumsq).zip(&dev) {
            *s += sign * d;
            *q += sign * d * d;
        }
        let dev = &dev;
        par::for_each_row_mut(&mut self.cross, n.max(1), |j, row| {
            let dj = sign * dev[j];
            for k in j + 1..n {
                row[k] += dj * dev[k];
            }
        });
        if sign > 0.0 {
            self.count += 1;
        } else {
            self.count -= 1;
        }
    }

    fn to_matrix(&self, mode: SignMode, col_ids: Vec<String>) -> CorrelationMatrix {
        let matrix = SymMatrix::from_upper(self.n_cols(), 1.0, |j, k| mode.fold(self.correlation(j, k)));
        CorrelationMatrix { matrix, mode, col_ids }
    }
}

/// How a slide was applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlideOutcome {
    Incremental {
        departed_rows: usize,
        arrived_rows: usize,
        added_cols: usize,
        removed_cols: usize,
    },
    /// Shared rows disagreed between the windows (the row space shifted), so
    /// the statistics were rebuilt from scratch.
    Recomputed,
}

/// Correlation matrix kept in step with a sliding window.
#[derive(Debug, Clone)]
pub struct IncrementalCorrelation {
    mode: SignMode,
    stats: PairStats,
    window: FeatureMatrix,
}

impl IncrementalCorrelation {
    pub fn from_matrix(x: &FeatureMatrix, mode: SignMode) -> Result<Self> {
        if x.n_rows() < 2 {
            return Err(Error::contract("correlation needs at least two rows"));
        }
        Ok(IncrementalCorrelation {
            mode,
            stats: PairStats::from_matrix(x),
            window: x.clone(),
        })
    }

    pub fn stats(&self) -> &PairStats {
        &self.stats
    }

    pub fn matrix(&self) -> CorrelationMatrix {
        self.stats.to_matrix(self.mode, self.window.col_ids().to_vec())
    }

    /// Move to window `next`.
    ///
    /// Rows are matched by id: rows only in the old window are removed from the
    /// statistics and rows only in `next` are added. Columns new in `next` get
    /// fresh statistics; vanished columns are dropped. If a shared row carries
    /// different values for a surviving column, the update falls back to a
    /// full recompute.
    pub fn slide(&mut self, next: &FeatureMatrix) -> Result<(CorrelationMatrix, SlideOutcome)> {
        if next.n_rows() < 2 {
            return Err(Error::contract("correlation needs at least two rows"));
        }
        let prev = &self.window;
        let prev_rows: HashMap<&str, usize> = prev
            .row_ids()
            .iter()
            .enumerate()
            .map(|(i, r)| (r.as_str(), i))
            .collect();
        let next_rows: HashMap<&str, usize> = next
            .row_ids()
            .iter()
            .enumerate()
            .map(|(i, r)| (r.as_str(), i))
            .collect();
        let prev_cols: HashMap<&str, usize> = prev
            .col_ids()
            .iter()
            .enumerate()
            .map(|(j, c)| (c.as_str(), j))
            .collect();

        // Position in `prev` of each column of `next`, if it survives.
        let origin: Vec<Option<usize>> = next
            .col_ids()
            .iter()
            .map(|c| prev_cols.get(c.as_str()).copied())
            .collect();

        let consistent = next
            .row_ids()
            .iter()
            .enumerate()
            .all(|(i, r)| match prev_rows.get(r.as_str()) {
                None => true,
                Some(&pi) => origin
                    .iter()
                    .enumerate()
                    .all(|(j, o)| o.is_none_or(|pj| prev.value(pi, pj) == next.value(i, j))),
            });
        if !consistent {
            self.stats = PairStats::from_matrix(next);
            self.window = next.clone();
            return Ok((self.matrix(), SlideOutcome::Recomputed));
        }

        let survivors: Vec<(usize, usize)> = origin
            .iter()
            .enumerate()
            .filter_map(|(j, o)| o.map(|pj| (j, pj)))
            .collect();
        let removed_cols = prev.n_cols() - survivors.len();
        let added_cols = next.n_cols() - survivors.len();

        // Statistics of surviving columns, re-indexed to their position among survivors.
        let s = survivors.len();
        let old = &self.stats;
        let pn = old.n_cols();
        let mut stats = PairStats {
            count: old.count,
            shift: survivors.iter().map(|&(_, pj)| old.shift[pj]).collect(),
            sum: survivors.iter().map(|&(_, pj)| old.sum[pj]).collect(),
            sumsq: survivors.iter().map(|&(_, pj)| old.sumsq[pj]).collect(),
            cross: vec![0.0; s * s],
        };
        for (a, &(_, pa)) in survivors.iter().enumerate() {
            for (b, &(_, pb)) in survivors.iter().enumerate().skip(a + 1) {
                let (lo, hi) = if pa < pb { (pa, pb) } else { (pb, pa) };
                stats.cross[a * s + b] = old.cross[lo * pn + hi];
            }
        }

        let mut departed = 0;
        for (pi, r) in prev.row_ids().iter().enumerate() {
            if !next_rows.contains_key(r.as_str()) {
                let values: Vec<f64> = survivors.iter().map(|&(_, pj)| prev.value(pi, pj)).collect();
                stats.apply_row(&values, -1.0);
                departed += 1;
            }
        }
        let mut arrived = 0;
        for (i, r) in next.row_ids().iter().enumerate() {
            if !prev_rows.contains_key(r.as_str()) {
                let values: Vec<f64> = survivors.iter().map(|&(j, _)| next.value(i, j)).collect();
                stats.apply_row(&values, 1.0);
                arrived += 1;
            }
        }
        debug_assert_eq!(stats.count, next.n_rows());

        self.stats = if added_cols == 0 && survivors.iter().enumerate().all(|(a, &(j, _))| a == j) {
            stats
        } else {
            expand(stats, &survivors, next)
        };
        self.window = next.clone();
        Ok((
            self.matrix(),
            SlideOutcome::Incremental {
                departed_rows: departed,
                arrived_rows: arrived,
                added_cols,
                removed_cols,
            },
        ))
    }
}

/// Lay survivor statistics out in `next`'s column order and compute fresh
/// statistics for columns that are new in `next`.
fn expand(stats: PairStats, survivors: &[(usize, usize)], next: &FeatureMatrix) -> PairStats {
    let n = next.n_cols();
    let s = survivors.len();
    let mut slot: Vec<Option<usize>> = vec![None; n];
    for (a, &(j, _)) in survivors.iter().enumerate() {
        slot[j] = Some(a);
    }
    let shift: Vec<f64> = (0..n)
        .map(|j| match slot[j] {
            Some(a) => stats.shift[a],
            None => next.column(j).first().copied().unwrap_or(0.0),
        })
        .collect();
    let dev = |j: usize| -> Vec<f64> { next.column(j).iter().map(|v| v - shift[j]).collect() };
    let fresh: Vec<Option<Vec<f64>>> = (0..n).map(|j| slot[j].is_none().then(|| dev(j))).collect();

    let mut out = PairStats {
        count: next.n_rows(),
        shift: shift.clone(),
        sum: vec![0.0; n],
        sumsq: vec![0.0; n],
        cross: vec![0.0; n * n],
    };
    for j in 0..n {
        match (slot[j], &fresh[j]) {
            (Some(a), _) => {
                out.sum[j] = stats.sum[a];
                out.sumsq[j] = stats.sumsq[a];
            }
            (None, Some(d)) => {
                out.sum[j] = d.iter().sum();
                out.sumsq[j] = dot(d, d);
            }
            (None, None) => unreachable!(),
        }
    }
    for j in 0..n {
        for k in j + 1..n {
            out.cross[j * n + k] = match (slot[j], slot[k]) {
                (Some(a), Some(b)) => {
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    stats.cross[lo * s + hi]
                }
                _ => {
                    let dj = fresh[j].clone().unwrap_or_else(|| dev(j));
                    let dk = fresh[k].clone().unwrap_or_else(|| dev(k));
                    dot(&dj, &dk)
                }
            };
        }
    }
    out
}

/// Apply one window slide to `state` and return the updated matrix.
pub fn update_correlation_incremental(
    state: &mut IncrementalCorrelation,
    next: &FeatureMatrix,
) -> Result<(CorrelationMatrix, SlideOutcome)> {
    state.slide(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(cols: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_columns(&cols.iter().map(|c| c.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1., 2., 3.], &[2., 4., 6.]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1., 2., 3.], &[3., 2., 1.]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[5., 5., 5.], &[1., 2., 3.]).unwrap(), 0.0);
        assert!(pearson(&[1., 2.], &[1., 2., 3.]).is_err());
        assert!(pearson(&[1.], &[1.]).is_err());
    }

    #[test]
    fn pearson_is_exactly_scale_free() {
        let a = pearson(&[1., 0., 2., 2., 0., 1.], &[0., 0., 1., 2., 1., 1.]).unwrap();
        let b = pearson(&[10., 0., 20., 20., 0., 10.], &[0., 0., 10., 20., 10., 10.]).unwrap();
        assert_eq!(a, b);
        // Deviations (0,-1,1,1,-1,0) and (-5,-5,1,7,1,1)/6: r = 2 / sqrt(4 * 102 / 36).
        assert!((a - 6.0 / 102f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fold_modes() {
        let x = fm(&[&[1., 2., 3., 4.], &[4., 3.1, 1.9, 1.]]);
        let r = pearson(x.column(0), x.column(1)).unwrap();
        assert!(r < -0.9);
        let abs = build_correlation_matrix(&x, SignMode::Absolute).unwrap();
        let pos = build_correlation_matrix(&x, SignMode::PositiveOnly).unwrap();
        let neg = build_correlation_matrix(&x, SignMode::NegativeOnly).unwrap();
        assert!((abs.get(0, 1) + r).abs() < 1e-14);
        assert_eq!(pos.get(0, 1), 0.0);
        assert!((neg.get(0, 1) + r).abs() < 1e-14);
        for p in [&abs, &pos, &neg] {
            assert_eq!(p.get(0, 0), 1.0);
            assert_eq!(p.get(1, 1), 1.0);
        }
    }

    #[test]
    fn identical_columns_give_all_ones() {
        let x = fm(&[&[1., 5., 2.], &[1., 5., 2.]]);
        let p = build_correlation_matrix(&x, SignMode::Absolute).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((p.get(i, j) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identity_slide_changes_nothing() {
        let x = fm(&[&[1., 2., 4., 3.], &[0., 1., 1., 5.], &[2., 2., 3., 1.]]);
        let mut inc = IncrementalCorrelation::from_matrix(&x, SignMode::Absolute).unwrap();
        let before = inc.matrix();
        let (after, outcome) = inc.slide(&x).unwrap();
        assert_eq!(before, after);
        assert_eq!(
            outcome,
            SlideOutcome::Incremental {
                departed_rows: 0,
                arrived_rows: 0,
                added_cols: 0,
                removed_cols: 0
            }
        );
    }

    #[test]
    fn changed_shared_rows_force_recompute() {
        let x = fm(&[&[1., 2., 4.], &[0., 1., 1.]]);
        let y = fm(&[&[1., 2., 5.], &[0., 1., 1.]]);
        let mut inc = IncrementalCorrelation::from_matrix(&x, SignMode::Absolute).unwrap();
        let (p, outcome) = inc.slide(&y).unwrap();
        assert_eq!(outcome, SlideOutcome::Recomputed);
        let batch = build_correlation_matrix(&y, SignMode::Absolute).unwrap();
        for (a, b) in p.matrix().data().iter().zip(batch.matrix().data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
