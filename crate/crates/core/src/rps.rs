//! Randomized principal-score detector.
//!
//! Columns are drawn with replacement with probability proportional to their
//! p-norm, duplicates are collapsed, and the principal score of the sampled
//! columns' correlation matrix is reported. Heavy columns are drawn more
//! often, so a correlated group that carries a large share of the window's
//! mass dominates the sample even when it is a small fraction of the columns.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::corrmat::{build_correlation_matrix, SignMode, Standardized};
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;
use crate::rng;
use crate::spectral::{component_series, correlation_with, membership_scores, principal_score, SolverConfig};

/// Which detector produced a [`Detection`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Direct,
    Rps,
    Gps,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Direct => "direct",
            Algorithm::Rps => "rps",
            Algorithm::Gps => "gps",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Algorithm::Direct),
            "rps" => Ok(Algorithm::Rps),
            "gps" => Ok(Algorithm::Gps),
            other => Err(Error::param(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// One detector's verdict on one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub window_id: usize,
    pub algorithm: Algorithm,
    /// Principal score of the evaluated matrix.
    pub score: f64,
    /// Column indices into the window, ascending and distinct.
    pub indices: Vec<usize>,
    /// Column ids matching `indices`.
    pub anomalies: Vec<String>,
    /// Anomaly strength of the detected set against the whole window.
    pub strength: f64,
    /// The evaluated matrix had too few distinct columns or a vanishing
    /// principal component; score and set are empty by convention.
    pub degenerate: bool,
}

impl Detection {
    pub fn empty(window_id: usize, algorithm: Algorithm) -> Self {
        Detection {
            window_id,
            algorithm,
            score: 0.0,
            indices: Vec::new(),
            anomalies: Vec::new(),
            strength: 0.0,
            degenerate: true,
        }
    }
}

/// Which columns the membership test runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MembershipScope {
    /// Only the sampled columns can be flagged.
    #[default]
    Sample,
    /// Every column of the window is compared with the sample's component.
    Window,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpsConfig {
    /// Norm order used for sampling weights and strength, `>= 1`.
    pub p: f64,
    /// Sampling ratio `r` in `(0, 1]`; `ceil(r n)` draws, at least 2.
    pub ratio: f64,
    /// Membership cutoff on `|corr(x_i, t)|`.
    pub threshold: f64,
    pub seed: u64,
    pub scope: MembershipScope,
    pub mode: SignMode,
    pub solver: SolverConfig,
}

impl Default for RpsConfig {
    fn default() -> Self {
        RpsConfig {
            p: 1.4,
            ratio: 0.2,
            threshold: 0.7,
            seed: 0,
            scope: MembershipScope::default(),
            mode: SignMode::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl RpsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(Error::param(format!("rps.p must be >= 1, got {}", self.p)));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::param(format!("rps.ratio must be in (0, 1], got {}", self.ratio)));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::param(format!(
                "rps.threshold must be in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Number of draws for a window of `n` columns.
    pub fn draws(&self, n: usize) -> usize {
        // The small offset keeps products like 0.2 * 1000 from rounding up.
        (((self.ratio * n as f64) - 1e-9).ceil() as usize).max(2)
    }
}

/// `||x||_p`.
pub fn p_norm(x: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

pub fn column_norms(x: &FeatureMatrix, p: f64) -> Vec<f64> {
    crate::par::map_range(x.n_cols(), |j| p_norm(x.column(j), p))
}

/// Share of the window's p-norm mass carried by the columns in `set`.
pub fn anomaly_strength(set: &[usize], x: &FeatureMatrix, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::param(format!("norm order must be >= 1, got {p}")));
    }
    if let Some(&bad) = set.iter().find(|&&j| j >= x.n_cols()) {
        return Err(Error::contract(format!("column {bad} out of range")));
    }
    Ok(strength_from_norms(set, &column_norms(x, p)))
}

pub(crate) fn strength_from_norms(set: &[usize], norms: &[f64]) -> f64 {
    let total: f64 = norms.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut set = set.to_vec();
    set.sort_unstable();
    set.dedup();
    let part: f64 = set.iter().map(|&j| norms[j]).sum();
    (part / total).clamp(0.0, 1.0)
}

/// Draw `ceil(r n)` column indices with replacement, each with probability
/// proportional to its p-norm.
pub fn sample_columns(x: &FeatureMatrix, config: &RpsConfig, window_id: usize) -> Result<Vec<usize>> {
    config.validate()?;
    sample_from_norms(
        &column_norms(x, config.p),
        config.draws(x.n_cols()),
        config.seed,
        window_id,
    )
}

fn sample_from_norms(norms: &[f64], draws: usize, seed: u64, window_id: usize) -> Result<Vec<usize>> {
    if norms.iter().all(|&w| w == 0.0) {
        return Err(Error::Sampling("every column has zero norm".into()));
    }
    let dist = WeightedIndex::new(norms).map_err(|e| Error::Sampling(e.to_string()))?;
    let mut r = rng::stream(seed, window_id as u64);
    Ok((0..draws).map(|_| dist.sample(&mut r)).collect())
}

/// Run the randomized detector on one window.
pub fn rps_detect(x: &FeatureMatrix, config: &RpsConfig) -> Result<Detection> {
    config.validate()?;
    let window_id = x.window_id;
    let norms = column_norms(x, config.p);
    let mut sample = sample_from_norms(&norms, config.draws(x.n_cols()), config.seed, window_id)?;
    sample.sort_unstable();
    sample.dedup();
    if sample.len() < 2 || x.n_rows() < 2 {
        return Ok(Detection::empty(window_id, Algorithm::Rps));
    }

    let sub = x.select_columns(&sample);
    let p = build_correlation_matrix(&sub, config.mode)?;
    let ps = principal_score(p.matrix(), &config.solver)?;

    let (indices, degenerate) = match config.scope {
        MembershipScope::Sample => {
            let m = membership_scores(&sub, &ps.eigen, config.mode)?;
            let idx = sample
                .iter()
                .zip(&m.scores)
                .filter(|(_, &s)| s > config.threshold)
                .map(|(&j, _)| j)
                .collect();
            (idx, m.degenerate)
        }
        MembershipScope::Window => {
            let zs = Standardized::from_matrix(&sub);
            match component_series(&zs, &ps.eigen, config.mode)? {
                Some(t) => {
                    let scores = correlation_with(&Standardized::from_matrix(x), &t);
                    let idx = (0..x.n_cols()).filter(|&j| scores[j] > config.threshold).collect();
                    (idx, false)
                }
                None => (Vec::new(), true),
            }
        }
    };

    Ok(Detection {
        window_id,
        algorithm: Algorithm::Rps,
        score: ps.rho.clamp(0.0, 1.0),
        anomalies: indices.iter().map(|&j: &usize| x.col_ids()[j].clone()).collect(),
        strength: strength_from_norms(&indices, &norms),
        indices,
        degenerate,
    })
}
