//! Per-window orchestration: run the enabled detectors, gate their output,
//! merge it into alerts, and keep per-run statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use crate::corrmat::{build_correlation_matrix, CorrelationMatrix, SignMode};
use crate::error::{Error, Result};
use crate::gps::{gps_fit, GpsConfig};
use crate::ingest::FeatureMatrix;
use crate::par;
use crate::rps::{column_norms, rps_detect, strength_from_norms, Algorithm, Detection, RpsConfig};
use crate::spectral::{membership_scores, principal_score};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Algorithms {
    pub direct: bool,
    pub rps: bool,
    pub gps: bool,
}

impl Default for Algorithms {
    fn default() -> Self {
        Algorithms {
            direct: true,
            rps: true,
            gps: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Alert threshold on the principal score (strict).
    pub threshold: f64,
    /// Minimum anomaly strength of an alert's set.
    pub strength_floor: f64,
    pub algorithms: Algorithms,
    pub mode: SignMode,
    /// Membership cutoff of the direct detector.
    pub direct_membership: f64,
    /// Emit one alert per passing detection instead of one merged alert.
    pub per_algorithm: bool,
    pub rps: RpsConfig,
    pub gps: GpsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            threshold: 0.7,
            strength_floor: 0.001,
            algorithms: Algorithms::default(),
            mode: SignMode::Absolute,
            direct_membership: 0.7,
            per_algorithm: false,
            rps: RpsConfig::default(),
            gps: GpsConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::param(format!(
                "threshold must be in (0, 1), got {}",
                self.threshold
            )));
        }
        if !(self.strength_floor >= 0.0 && self.strength_floor < 1.0) {
            return Err(Error::param(format!(
                "strength floor must be in [0, 1), got {}",
                self.strength_floor
            )));
        }
        self.rps.validate()?;
        self.gps.validate()
    }
}

/// Why a detection did not become an alert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Suppression {
    BelowThreshold,
    BelowStrength,
    EmptySet,
}

impl Suppression {
    pub fn as_str(self) -> &'static str {
        match self {
            Suppression::BelowThreshold => "below_threshold",
            Suppression::BelowStrength => "below_strength",
            Suppression::EmptySet => "empty_set",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alert {
    pub window_id: usize,
    pub start: i64,
    pub end: i64,
    /// Contributing detectors joined with `+`, e.g. `rps+gps`.
    pub algorithm: String,
    pub score: f64,
    pub strength: f64,
    pub anomalies: Vec<String>,
    /// Confirmed by the generative detector.
    pub core: Vec<String>,
    /// Found by the principal-component detectors only.
    pub suspicious: Vec<String>,
}

/// Check a detection against the alert predicate: score strictly above the
/// threshold, strength at least the floor, nonempty set.
pub fn gate_alert(det: &Detection, config: &PipelineConfig) -> std::result::Result<(), Suppression> {
    if !(det.score > config.threshold) {
        Err(Suppression::BelowThreshold)
    } else if det.indices.is_empty() {
        Err(Suppression::EmptySet)
    } else if det.strength < config.strength_floor {
        Err(Suppression::BelowStrength)
    } else {
        Ok(())
    }
}

/// Set algebra of merged reporting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Merged {
    pub union: BTreeSet<usize>,
    pub core: BTreeSet<usize>,
    pub suspicious: BTreeSet<usize>,
}

/// Merge the principal-component detections (randomized and direct) with the
/// generative ones. Core is what the generative detector found, whether or not
/// the others agree; suspicious is what only the others found.
pub fn merge_detections(pc: &[&Detection], gps: &[&Detection]) -> Merged {
    let pc: BTreeSet<usize> = pc.iter().flat_map(|d| d.indices.iter().copied()).collect();
    let core: BTreeSet<usize> = gps.iter().flat_map(|d| d.indices.iter().copied()).collect();
    let suspicious = pc.difference(&core).copied().collect();
    let union = pc.union(&core).copied().collect();
    Merged {
        union,
        core,
        suspicious,
    }
}

/// Everything one window produced.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub window_id: usize,
    pub detections: Vec<Detection>,
    /// Gate verdict per entry of `detections`.
    pub verdicts: Vec<std::result::Result<(), Suppression>>,
    pub alerts: Vec<Alert>,
    /// Wall time per detector; the direct detector's share includes building
    /// the full correlation matrix.
    pub runtimes: Vec<(Algorithm, Duration)>,
}

/// Principal score and membership over the whole window.
pub fn direct_detect(x: &FeatureMatrix, p: &CorrelationMatrix, config: &PipelineConfig) -> Result<Detection> {
    let ps = principal_score(p.matrix(), &config.rps.solver)?;
    let m = membership_scores(x, &ps.eigen, config.mode)?;
    let indices: Vec<usize> = (0..x.n_cols())
        .filter(|&j| m.scores[j] > config.direct_membership)
        .collect();
    let norms = column_norms(x, config.rps.p);
    Ok(Detection {
        window_id: x.window_id,
        algorithm: Algorithm::Direct,
        score: ps.rho.clamp(0.0, 1.0),
        anomalies: indices.iter().map(|&j| x.col_ids()[j].clone()).collect(),
        strength: strength_from_norms(&indices, &norms),
        indices,
        degenerate: m.degenerate,
    })
}

/// Run the enabled detectors on one window (direct, then randomized, then
/// generative seeded with the randomized result) and build its alerts.
pub fn run_window(x: &FeatureMatrix, config: &PipelineConfig) -> Result<WindowResult> {
    let mut detections = Vec::new();
    let mut runtimes = Vec::new();
    let algs = config.algorithms;

    let mut full: Option<CorrelationMatrix> = None;
    if algs.direct {
        let t = Instant::now();
        let p = build_correlation_matrix(x, config.mode)?;
        detections.push(direct_detect(x, &p, config)?);
        runtimes.push((Algorithm::Direct, t.elapsed()));
        full = Some(p);
    }
    let mut rps_set = None;
    if algs.rps {
        let t = Instant::now();
        let mut cfg = config.rps.clone();
        cfg.mode = config.mode;
        let d = rps_detect(x, &cfg)?;
        rps_set = Some(d.indices.clone());
        detections.push(d);
        runtimes.push((Algorithm::Rps, t.elapsed()));
    }
    if algs.gps {
        let t = Instant::now();
        let p = match full.take() {
            Some(p) => p,
            None => build_correlation_matrix(x, config.mode)?,
        };
        let init = rps_set.map(|s| vec![s]);
        let fit = gps_fit(&p, &config.gps, init.as_deref())?;
        detections.extend(fit.detections(x, config.rps.p, x.window_id));
        runtimes.push((Algorithm::Gps, t.elapsed()));
    }

    let verdicts: Vec<_> = detections.iter().map(|d| gate_alert(d, config)).collect();
    let alerts = build_alerts(x, &detections, &verdicts, config);
    Ok(WindowResult {
        window_id: x.window_id,
        detections,
        verdicts,
        alerts,
        runtimes,
    })
}

fn build_alerts(
    x: &FeatureMatrix,
    detections: &[Detection],
    verdicts: &[std::result::Result<(), Suppression>],
    config: &PipelineConfig,
) -> Vec<Alert> {
    let passing: Vec<&Detection> = detections
        .iter()
        .zip(verdicts)
        .filter(|(_, v)| v.is_ok())
        .map(|(d, _)| d)
        .collect();
    if passing.is_empty() {
        return Vec::new();
    }
    let pc: Vec<&Detection> = passing
        .iter()
        .copied()
        .filter(|d| d.algorithm != Algorithm::Gps)
        .collect();
    let gps: Vec<&Detection> = passing
        .iter()
        .copied()
        .filter(|d| d.algorithm == Algorithm::Gps)
        .collect();
    let merged = merge_detections(&pc, &gps);
    let ids = |s: &mut dyn Iterator<Item = usize>| -> Vec<String> { s.map(|j| x.col_ids()[j].clone()).collect() };

    if config.per_algorithm {
        return passing
            .iter()
            .map(|d| Alert {
                window_id: x.window_id,
                start: x.start,
                end: x.end,
                algorithm: d.algorithm.to_string(),
                score: d.score,
                strength: d.strength,
                anomalies: d.anomalies.clone(),
                core: ids(&mut d.indices.iter().copied().filter(|j| merged.core.contains(j))),
                suspicious: ids(&mut d.indices.iter().copied().filter(|j| merged.suspicious.contains(j))),
            })
            .collect();
    }

    let mut algs: Vec<Algorithm> = passing.iter().map(|d| d.algorithm).collect();
    algs.sort();
    algs.dedup();
    let union: Vec<usize> = merged.union.iter().copied().collect();
    let norms = column_norms(x, config.rps.p);
    vec![Alert {
        window_id: x.window_id,
        start: x.start,
        end: x.end,
        algorithm: algs.iter().map(|a| a.as_str()).collect::<Vec<_>>().join("+"),
        score: passing.iter().map(|d| d.score).fold(0.0, f64::max),
        strength: strength_from_norms(&union, &norms),
        anomalies: ids(&mut union.iter().copied()),
        core: ids(&mut merged.core.iter().copied()),
        suspicious: ids(&mut merged.suspicious.iter().copied()),
    }]
}

/// Running totals over a stream of windows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub windows: usize,
    pub failed_windows: usize,
    pub alerts: usize,
    /// Passing detections per algorithm.
    pub detections_passed: BTreeMap<String, usize>,
    /// Suppressed detections per reason.
    pub suppressed: BTreeMap<String, usize>,
    /// `(count, total seconds, max seconds)` per algorithm.
    pub runtime: BTreeMap<String, (usize, f64, f64)>,
}

impl RunSummary {
    pub fn record(&mut self, r: &WindowResult) {
        self.windows += 1;
        self.alerts += r.alerts.len();
        for (d, v) in r.detections.iter().zip(&r.verdicts) {
            match v {
                Ok(()) => *self.detections_passed.entry(d.algorithm.to_string()).or_default() += 1,
                Err(s) => *self.suppressed.entry(s.as_str().to_string()).or_default() += 1,
            }
        }
        for (a, t) in &r.runtimes {
            let e = self.runtime.entry(a.to_string()).or_insert((0, 0.0, 0.0));
            let s = t.as_secs_f64();
            e.0 += 1;
            e.1 += s;
            e.2 = e.2.max(s);
        }
    }

    pub fn mean_runtime(&self, alg: Algorithm) -> Option<f64> {
        self.runtime
            .get(alg.as_str())
            .filter(|e| e.0 > 0)
            .map(|e| e.1 / e.0 as f64)
    }
}

/// Process windows in batches of `batch` (at least 1) concurrently, handing
/// results to `sink` in window order. A window whose detectors fail is logged,
/// counted and skipped.
pub fn run_stream<I, F>(windows: I, config: &PipelineConfig, batch: usize, mut sink: F) -> Result<RunSummary>
where
    I: IntoIterator<Item = FeatureMatrix>,
    F: FnMut(&WindowResult) -> Result<()>,
{
    config.validate()?;
    let mut summary = RunSummary::default();
    let mut it = windows.into_iter().peekable();
    let batch = batch.max(1);
    while it.peek().is_some() {
        let chunk: Vec<FeatureMatrix> = it.by_ref().take(batch).collect();
        let results = par::map_slice(&chunk, |x| (x.window_id, run_window(x, config)));
        for (id, r) in results {
            match r {
                Ok(r) => {
                    summary.record(&r);
                    sink(&r)?;
                }
                Err(e) => {
                    log::warn!("window {id}: detection failed: {e}");
                    summary.failed_windows += 1;
                }
            }
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(alg: Algorithm, score: f64, strength: f64, idx: &[usize]) -> Detection {
        Detection {
            window_id: 0,
            algorithm: alg,
            score,
            indices: idx.to_vec(),
            anomalies: idx.iter().map(|i| i.to_string()).collect(),
            strength,
            degenerate: false,
        }
    }

    #[test]
    fn gate_examples() {
        let cfg = PipelineConfig::default();
        assert_eq!(
            gate_alert(&det(Algorithm::Rps, 0.69, 0.5, &[1]), &cfg),
            Err(Suppression::BelowThreshold)
        );
        assert_eq!(
            gate_alert(&det(Algorithm::Rps, 0.7, 0.5, &[1]), &cfg),
            Err(Suppression::BelowThreshold)
        );
        assert_eq!(
            gate_alert(&det(Algorithm::Rps, 0.75, 0.0005, &[1]), &cfg),
            Err(Suppression::BelowStrength)
        );
        assert_eq!(
            gate_alert(&det(Algorithm::Rps, 0.75, 0.02, &[]), &cfg),
            Err(Suppression::EmptySet)
        );
        assert_eq!(gate_alert(&det(Algorithm::Rps, 0.75, 0.02, &[1]), &cfg), Ok(()));
    }

    #[test]
    fn merge_examples() {
        let set = |v: &[usize]| v.iter().copied().collect::<BTreeSet<_>>();
        let r = det(Algorithm::Rps, 0.9, 0.1, &[0, 1, 2]);
        let g = det(Algorithm::Gps, 0.9, 0.1, &[1, 2]);
        let m = merge_detections(&[&r], &[&g]);
        assert_eq!((m.core, m.suspicious), (set(&[1, 2]), set(&[0])));

        let g = det(Algorithm::Gps, 0.9, 0.1, &[3]);
        let m = merge_detections(&[], &[&g]);
        assert_eq!((m.core, m.suspicious), (set(&[3]), set(&[])));

        let r = det(Algorithm::Rps, 0.9, 0.1, &[0]);
        let m = merge_detections(&[&r], &[]);
        assert_eq!((m.core, m.suspicious), (set(&[]), set(&[0])));
    }
}
