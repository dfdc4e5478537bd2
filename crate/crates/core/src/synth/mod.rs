//! Synthetic data: planted correlation matrices and data windows, anomaly
//! injection, evaluation metrics and the numerical experiments built on them.

mod experiments;
mod inject;
mod render;

pub use experiments::{
    concentration, degeneration_curve, predicted_rho, scaling, ConcentrationRow, DegenerationRow, ScalingRow,
};
pub use inject::{
    evaluate, inject_anomalies, parameter_sweep, EvalReport, Injected, Scenario, SweepGrid, SweepRow, WindowEval,
};
pub use render::{count_window, render_access_log};

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::corrmat::{CorrelationMatrix, SignMode};
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;
use crate::rng;
use crate::rps::{column_norms, p_norm};
use crate::spectral::SymMatrix;

/// Concentration `a + b` of the beta law used for within-anomaly entries.
pub const ANOMALY_CONCENTRATION: f64 = 20.0;

/// How the anomaly count follows the window size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthRule {
    Fixed(usize),
    /// `k = round(n^m)`.
    Power(f64),
    /// `k = round(c n)`.
    Fraction(f64),
}

impl GrowthRule {
    pub fn count(self, n: usize) -> usize {
        let k = match self {
            GrowthRule::Fixed(k) => k,
            GrowthRule::Power(m) => (n as f64).powf(m).round() as usize,
            GrowthRule::Fraction(c) => (c * n as f64).round() as usize,
        };
        k.min(n)
    }
}

impl std::str::FromStr for GrowthRule {
    type Err = Error;

    /// Accepts `n^0.8`, `0.2n` or a plain count.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param(format!("cannot read growth rule {s:?}"));
        let s = s.trim();
        if let Some(m) = s.strip_prefix("n^") {
            return m.parse().map(GrowthRule::Power).map_err(|_| bad());
        }
        if let Some(c) = s.strip_suffix('n') {
            return c
                .trim_end_matches('*')
                .parse()
                .map(GrowthRule::Fraction)
                .map_err(|_| bad());
        }
        s.parse().map(GrowthRule::Fixed).map_err(|_| bad())
    }
}

/// Parameters of a planted instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub n: usize,
    pub k: usize,
    /// Mean background correlation.
    pub mu: f64,
    /// Standard deviation of background entries (matrix mode).
    pub sigma: f64,
    /// Mean within-anomaly correlation.
    pub mu_tilde: f64,
    /// Rows of a generated data window.
    pub rows: usize,
    /// Anomaly strength of the planted set in a data window; `None` keeps
    /// every column at the same scale.
    pub strength_target: Option<f64>,
    /// Norm order of `strength_target`.
    pub norm_order: f64,
}

impl PlantedSpec {
    /// Matrix-mode spec whose background has the same concentration as the
    /// anomaly entries.
    pub fn matrix(n: usize, k: usize, mu: f64, mu_tilde: f64) -> Self {
        PlantedSpec {
            n,
            k,
            mu,
            sigma: (mu * (1.0 - mu) / (ANOMALY_CONCENTRATION + 1.0)).sqrt(),
            mu_tilde,
            rows: 0,
            strength_target: None,
            norm_order: 1.4,
        }
    }

    /// Data-window spec.
    pub fn window(n: usize, k: usize, rows: usize, mu: f64, mu_tilde: f64) -> Self {
        PlantedSpec {
            rows,
            ..Self::matrix(n, k, mu, mu_tilde)
        }
    }

    pub fn with_strength(mut self, phi: f64) -> Self {
        self.strength_target = Some(phi);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k > self.n {
            return Err(Error::param(format!(
                "need 0 <= k <= n and n > 0, got k={} n={}",
                self.k, self.n
            )));
        }
        if !(0.0..=1.0).contains(&self.mu) || !(0.0..=1.0).contains(&self.mu_tilde) {
            return Err(Error::param("mean correlations must lie in [0, 1]"));
        }
        if self.k > 0 && self.mu_tilde < self.mu {
            return Err(Error::param("anomaly mean must not be below the background mean"));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::param("sigma must be finite and nonnegative"));
        }
        if let Some(phi) = self.strength_target {
            if !(phi > 0.0 && phi < 1.0) {
                return Err(Error::param(format!("strength target must be in (0, 1), got {phi}")));
            }
        }
        Ok(())
    }
}

/// A generated object and the indices of its planted anomalies.
#[derive(Debug, Clone, PartialEq)]
pub struct Planted<T> {
    pub value: T,
    /// Ascending column indices of the planted set.
    pub truth: Vec<usize>,
}

/// Entry law on `[0, 1]` with a given mean and standard deviation.
#[derive(Debug, Clone, Copy)]
enum EntryLaw {
    Constant(f64),
    Beta(Beta<f64>),
}

impl EntryLaw {
    fn new(mean: f64, sd: f64) -> Result<Self> {
        if sd == 0.0 || mean == 0.0 || mean == 1.0 {
            if sd > 0.0 {
                return Err(Error::param(format!("no [0, 1] law has mean {mean} and sd {sd}")));
            }
            return Ok(EntryLaw::Constant(mean));
        }
        let conc = mean * (1.0 - mean) / (sd * sd) - 1.0;
        if !(conc > 0.0) {
            return Err(Error::param(format!("no [0, 1] law has mean {mean} and sd {sd}")));
        }
        let beta = Beta::new(mean * conc, (1.0 - mean) * conc).map_err(|e| Error::param(e.to_string()))?;
        Ok(EntryLaw::Beta(beta))
    }

    fn with_concentration(mean: f64, conc: f64) -> Result<Self> {
        if mean == 0.0 || mean == 1.0 {
            return Ok(EntryLaw::Constant(mean));
        }
        let sd = (mean * (1.0 - mean) / (conc + 1.0)).sqrt();
        Self::new(mean, sd)
    }

    #[inline]
    fn draw(&self, r: &mut rng::Rng) -> f64 {
        match self {
            EntryLaw::Constant(c) => *c,
            EntryLaw::Beta(b) => b.sample(r),
        }
    }
}

/// Random symmetric matrix with unit diagonal: entries between two planted
/// columns have mean `mu_tilde`, all others mean `mu` and sd `sigma`. The
/// planted set is the first `k` columns. Row `i` draws from its own stream, so
/// the result does not depend on thread count.
pub fn gen_planted_matrix(spec: &PlantedSpec, seed: u64) -> Result<Planted<CorrelationMatrix>> {
    spec.validate()?;
    let n = spec.n;
    let k = spec.k;
    let background = EntryLaw::new(spec.mu, spec.sigma)?;
    let anomaly = EntryLaw::with_concentration(spec.mu_tilde, ANOMALY_CONCENTRATION)?;
    let mut data = vec![0.0; n * n];
    crate::par::for_each_row_mut(&mut data, n, |i, row| {
        let mut r = rng::stream(seed, i as u64);
        row[i] = 1.0;
        for (j, x) in row.iter_mut().enumerate().skip(i + 1) {
            let law = if j < k { &anomaly } else { &background };
            *x = law.draw(&mut r).clamp(0.0, 1.0);
        }
    });
    crate::spectral::mirror_upper(n, &mut data);
    let matrix = SymMatrix::from_vec_unchecked(n, data);
    let ids = (0..n).map(|i| format!("c{i}")).collect();
    Ok(Planted {
        value: CorrelationMatrix::new(matrix, SignMode::Absolute, ids)?,
        truth: (0..k).collect(),
    })
}

fn normal_vec(r: &mut rng::Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
}

/// Data window with a planted correlated set.
///
/// Every column shares a background factor with loading `sqrt(mu)`; planted
/// columns add a common anomaly factor with loading `sqrt(mu_tilde - mu)`; the
/// rest is independent noise. Expected correlations are therefore `mu_tilde`
/// within the set and `mu` elsewhere. Planted columns are then rescaled so
/// their share of the p-norm mass is exactly `strength_target`. Planted column
/// positions are drawn at random.
pub fn gen_planted_stream(spec: &PlantedSpec, seed: u64) -> Result<Planted<FeatureMatrix>> {
    spec.validate()?;
    if spec.rows < 2 {
        return Err(Error::param("a data window needs at least two rows"));
    }
    let (n, k, m) = (spec.n, spec.k, spec.rows);
    let mut r = rng::stream(seed, u64::MAX);
    let shared = normal_vec(&mut r, m);
    let group = normal_vec(&mut r, m);
    let mut truth: Vec<usize> = if k == 0 {
        Vec::new()
    } else {
        sample_indices(&mut r, n, k).into_vec()
    };
    truth.sort_unstable();
    let mut planted = vec![false; n];
    for &j in &truth {
        planted[j] = true;
    }

    let (lb, lg, le_bg, le_an) = (
        spec.mu.sqrt(),
        (spec.mu_tilde - spec.mu).max(0.0).sqrt(),
        (1.0 - spec.mu).sqrt(),
        (1.0 - spec.mu_tilde).max(0.0).sqrt(),
    );
    let mut columns: Vec<Vec<f64>> = crate::par::map_range(n, |j| {
        let mut r = rng::stream(seed, j as u64);
        let noise = normal_vec(&mut r, m);
        (0..m)
            .map(|i| {
                if planted[j] {
                    lb * shared[i] + lg * group[i] + le_an * noise[i]
                } else {
                    lb * shared[i] + le_bg * noise[i]
                }
            })
            .collect()
    });

    if let Some(phi) = spec.strength_target {
        if k == 0 || k == n {
            return Err(Error::param("a strength target needs both planted and normal columns"));
        }
        let norms: Vec<f64> = columns.iter().map(|c| p_norm(c, spec.norm_order)).collect();
        let a: f64 = truth.iter().map(|&j| norms[j]).sum();
        let b: f64 = norms.iter().sum::<f64>() - a;
        let s = phi * b / ((1.0 - phi) * a);
        for &j in &truth {
            columns[j].iter_mut().for_each(|v| *v *= s);
        }
    }

    let rows = (0..m).map(|i| format!("t{i}")).collect();
    let cols = (0..n).map(|j| format!("c{j}")).collect();
    let value = FeatureMatrix::new(rows, cols, columns.concat())?;
    Ok(Planted { value, truth })
}

/// Data window with a tight core block and a looser fringe around it.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreFringe {
    pub window: FeatureMatrix,
    /// Ascending column indices of the core block.
    pub core: Vec<usize>,
    /// Ascending column indices of the fringe.
    pub fringe: Vec<usize>,
}

/// Window of `n` columns with a tight core block and a looser fringe. Core
/// columns share a group factor with pairwise correlation `core_corr`; fringe
/// columns load more lightly on it, reaching `fringe_corr` among themselves
/// and `sqrt(core_corr * fringe_corr)` with the core. Background columns load
/// on an unrelated common factor with loadings uniform in `[0, spread]`, so
/// background correlations are spread out rather than clustered at one value.
/// Core and fringe are placed at random and scaled together to reach
/// `strength` under norm order 1.4.
#[allow(clippy::too_many_arguments)]
pub fn gen_core_fringe(
    n: usize,
    core: usize,
    fringe: usize,
    rows: usize,
    spread: f64,
    core_corr: f64,
    fringe_corr: f64,
    strength: f64,
    seed: u64,
) -> Result<CoreFringe> {
    if core + fringe >= n || core < 2 || rows < 2 {
        return Err(Error::param(
            "need at least two core columns, some background and two rows",
        ));
    }
    if !(0.0 <= fringe_corr && fringe_corr <= core_corr && core_corr <= 1.0 && (0.0..=1.0).contains(&spread)) {
        return Err(Error::param(
            "need 0 <= fringe_corr <= core_corr <= 1 and spread in [0, 1]",
        ));
    }
    if !(strength > 0.0 && strength < 1.0) {
        return Err(Error::param("strength must lie in (0, 1)"));
    }
    let mut r = rng::stream(seed, u64::MAX);
    let shared = normal_vec(&mut r, rows);
    let factor = normal_vec(&mut r, rows);
    let picked = sample_indices(&mut r, n, core + fringe).into_vec();
    let mut core_idx = picked[..core].to_vec();
    let mut fringe_idx = picked[core..].to_vec();
    core_idx.sort_unstable();
    fringe_idx.sort_unstable();
    let mut group = vec![None; n];
    for &j in &core_idx {
        group[j] = Some(core_corr.sqrt());
    }
    for &j in &fringe_idx {
        group[j] = Some(fringe_corr.sqrt());
    }
    let mut columns: Vec<Vec<f64>> = crate::par::map_range(n, |j| {
        let mut r = rng::stream(seed, j as u64);
        let (l, f) = match group[j] {
            Some(l) => (l, &factor),
            None => (r.random_range(0.0..=spread), &shared),
        };
        let e = (1.0 - l * l).sqrt();
        let noise = normal_vec(&mut r, rows);
        (0..rows).map(|i| l * f[i] + e * noise[i]).collect()
    });
    let norms: Vec<f64> = columns.iter().map(|c| p_norm(c, 1.4)).collect();
    let a: f64 = picked.iter().map(|&j| norms[j]).sum();
    let b: f64 = norms.iter().sum::<f64>() - a;
    let s = strength * b / ((1.0 - strength) * a);
    for &j in &picked {
        columns[j].iter_mut().for_each(|v| *v *= s);
    }
    let row_ids = (0..rows).map(|i| format!("t{i}")).collect();
    let col_ids = (0..n).map(|j| format!("c{j}")).collect();
    Ok(CoreFringe {
        window: FeatureMatrix::new(row_ids, col_ids, columns.concat())?,
        core: core_idx,
        fringe: fringe_idx,
    })
}

/// Strength of `set` in `x` under norm order `p`.
pub fn measured_strength(x: &FeatureMatrix, set: &[usize], p: f64) -> f64 {
    let norms = column_norms(x, p);
    crate::rps::strength_from_norms(set, &norms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_rules() {
        assert_eq!(GrowthRule::Power(0.8).count(1000), 251);
        assert_eq!(GrowthRule::Fraction(0.2).count(1000), 200);
        assert_eq!("n^0.8".parse::<GrowthRule>().unwrap(), GrowthRule::Power(0.8));
        assert_eq!("0.2n".parse::<GrowthRule>().unwrap(), GrowthRule::Fraction(0.2));
        assert_eq!("7".parse::<GrowthRule>().unwrap(), GrowthRule::Fixed(7));
        assert!("x".parse::<GrowthRule>().is_err());
    }

    #[test]
    fn infeasible_background_is_rejected() {
        let mut spec = PlantedSpec::matrix(10, 2, 0.5, 0.9);
        spec.sigma = 0.6;
        assert!(gen_planted_matrix(&spec, 1).is_err());
        spec.mu = 0.0;
        spec.sigma = 0.1;
        assert!(gen_planted_matrix(&spec, 1).is_err());
    }

    #[test]
    fn planted_matrix_is_a_valid_correlation_matrix() {
        let spec = PlantedSpec::matrix(60, 10, 0.3, 0.85);
        let p = gen_planted_matrix(&spec, 3).unwrap();
        assert_eq!(p.truth, (0..10).collect::<Vec<_>>());
        assert_eq!(p, gen_planted_matrix(&spec, 3).unwrap());
        let m = p.value.matrix();
        for i in 0..60 {
            assert_eq!(m.get(i, i), 1.0);
            for j in 0..60 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
    }

    #[test]
    fn strength_target_is_hit_exactly() {
        let spec = PlantedSpec::window(200, 20, 50, 0.2, 0.85).with_strength(0.4);
        let w = gen_planted_stream(&spec, 9).unwrap();
        assert!((measured_strength(&w.value, &w.truth, 1.4) - 0.4).abs() < 1e-12);
        assert_eq!(w.truth.len(), 20);
    }
}
