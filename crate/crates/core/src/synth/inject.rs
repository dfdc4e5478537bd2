use std::collections::BTreeSet;
use std::time::Instant;

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::experiments::mean_sd;
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;
use crate::par;
use crate::pipeline::{run_window, PipelineConfig};
use crate::rng;
use crate::rps::{column_norms, p_norm};

/// Injection scenarios: many anomalies at ordinary magnitude, a moderate
/// number at high strength, or a few dozen to a few hundred at low strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// 20% to 50% of the resulting columns, ordinary magnitude.
    BigSets,
    /// 5% to 20% of the resulting columns carrying 30% to 60% of the mass.
    StrongStrength,
    /// 20 to 200 columns carrying under 10% of the mass.
    Hidden,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::BigSets => "big_sets",
            Scenario::StrongStrength => "strong_strength",
            Scenario::Hidden => "hidden",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "big_sets" => Ok(Scenario::BigSets),
            "strong_strength" => Ok(Scenario::StrongStrength),
            "hidden" => Ok(Scenario::Hidden),
            other => Err(Error::param(format!("unknown scenario {other:?}"))),
        }
    }
}

/// A window with injected columns appended.
#[derive(Debug, Clone, PartialEq)]
pub struct Injected {
    pub window: FeatureMatrix,
    /// Columns of the window before injection (the injected ones follow).
    pub original_cols: usize,
    /// Indices of the injected columns.
    pub truth: Vec<usize>,
    /// Mean pairwise correlation the injected columns were generated with.
    pub correlation: f64,
    /// Measured strength of the injected set under norm order `norm_order`.
    pub strength: f64,
    pub norm_order: f64,
}

impl Injected {
    pub fn truth_ids(&self) -> BTreeSet<String> {
        self.truth.iter().map(|&j| self.window.col_ids()[j].clone()).collect()
    }

    /// The window as it was before injection.
    pub fn original(&self) -> FeatureMatrix {
        let idx: Vec<usize> = (0..self.original_cols).collect();
        self.window.select_columns(&idx)
    }
}

const BURST_RATE: f64 = 0.1;
const BURST_SCALE: f64 = 4.0;

/// Append correlated columns to `window` according to `scenario`. Counts,
/// strengths and the within-set correlation (0.8 to 0.95) are drawn uniformly
/// from the scenario's ranges. Fails when the window cannot host the
/// scenario: fewer than 3 rows, no mass, or fewer than 2 columns to inject.
pub fn inject_anomalies(window: &FeatureMatrix, scenario: Scenario, seed: u64, norm_order: f64) -> Result<Injected> {
    let n = window.n_cols();
    let m = window.n_rows();
    let mut r = rng::stream(seed, window.window_id as u64);
    let norms = column_norms(window, norm_order);
    let mass: f64 = norms.iter().sum();
    if m < 3 || mass == 0.0 {
        return Err(Error::Domain(format!(
            "window {} is too small to host {} ({m} rows)",
            window.window_id,
            scenario.as_str()
        )));
    }
    let fraction_count = |lo: f64, hi: f64, r: &mut rng::Rng| {
        let f: f64 = r.random_range(lo..=hi);
        (f * n as f64 / (1.0 - f)).round() as usize
    };
    let (count, target) = match scenario {
        Scenario::BigSets => (fraction_count(0.2, 0.5, &mut r), None),
        Scenario::StrongStrength => {
            let c = fraction_count(0.05, 0.2, &mut r);
            (c, Some(r.random_range(0.3..=0.6)))
        }
        Scenario::Hidden => (r.random_range(20..=200), Some(r.random_range(0.005..0.1))),
    };
    if count < 2 {
        return Err(Error::Domain(format!(
            "window {} is too small to host {}",
            window.window_id,
            scenario.as_str()
        )));
    }
    let rho: f64 = r.random_range(0.8..=0.95);
    // Bursty shared activity: a unit-variance scale mixture of normals.
    let norm = (1.0 - BURST_RATE + BURST_RATE * BURST_SCALE * BURST_SCALE).sqrt();
    let latent: Vec<f64> = (0..m)
        .map(|_| {
            let z: f64 = r.sample(StandardNormal);
            let s = if r.random_bool(BURST_RATE) { BURST_SCALE } else { 1.0 };
            z * s / norm
        })
        .collect();
    let mut cols: Vec<Vec<f64>> = (0..count)
        .map(|_| {
            latent
                .iter()
                .map(|h| rho.sqrt() * h + (1.0 - rho).sqrt() * r.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let added: f64 = cols.iter().map(|c| p_norm(c, norm_order)).sum();
    let scale = match target {
        Some(phi) => phi * mass / ((1.0 - phi) * added),
        // Match the typical existing column.
        None => {
            let mut sorted = norms.clone();
            sorted.sort_by(f64::total_cmp);
            sorted[sorted.len() / 2].max(mass / n as f64 * 1e-3) * count as f64 / added
        }
    };
    cols.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v *= scale));

    let existing: BTreeSet<&str> = window.col_ids().iter().map(String::as_str).collect();
    let mut ids = Vec::with_capacity(count);
    let mut next = 0usize;
    while ids.len() < count {
        let id = format!("inj{next}");
        next += 1;
        if !existing.contains(id.as_str()) {
            ids.push(id);
        }
    }
    let mut out = window.clone();
    out.append_columns(ids, &cols)?;
    let truth: Vec<usize> = (n..n + count).collect();
    let strength = super::measured_strength(&out, &truth, norm_order);
    Ok(Injected {
        window: out,
        original_cols: n,
        truth,
        correlation: rho,
        strength,
        norm_order,
    })
}

/// Detection outcome of one evaluated window, by column id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowEval {
    pub detected: BTreeSet<String>,
    pub injected: BTreeSet<String>,
    /// Real columns already flagged before injection; excluded from the
    /// accuracy denominator.
    pub pre_suspicious: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Detected injected / injected; `None` when nothing was injected.
    pub recall: Option<f64>,
    /// Detected injected / detected (minus pre-flagged real columns); `None`
    /// when nothing was detected.
    pub est_accuracy: Option<f64>,
    /// Alerts raised on control windows.
    pub extra_alerts: usize,
    pub runtime_mean: f64,
    pub runtime_max: f64,
    pub windows: usize,
}

pub fn evaluate(windows: &[WindowEval], control_alerts: usize, runtimes: &[f64]) -> EvalReport {
    let mut hit = 0usize;
    let mut injected = 0usize;
    let mut counted = 0usize;
    for w in windows {
        hit += w.detected.intersection(&w.injected).count();
        injected += w.injected.len();
        counted += w.detected.iter().filter(|id| !w.pre_suspicious.contains(*id)).count();
    }
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    let (mean, _) = mean_sd(runtimes);
    EvalReport {
        recall: ratio(hit, injected),
        est_accuracy: ratio(hit, counted),
        extra_alerts: control_alerts,
        runtime_mean: if runtimes.is_empty() { 0.0 } else { mean },
        runtime_max: runtimes.iter().copied().fold(0.0, f64::max),
        windows: windows.len(),
    }
}

/// Grid of a parameter sweep. Each list is swept on its own with everything
/// else at the base configuration; an empty list skips that parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub r: Vec<f64>,
    pub p: Vec<f64>,
    pub alpha: Vec<f64>,
    pub ell: Vec<usize>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            r: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
            p: vec![1.0, 1.2, 1.4, 1.6, 1.8, 2.0],
            alpha: vec![0.6, 0.65, 0.7, 0.75, 0.8, 0.85],
            ell: vec![1, 2, 3, 4, 5],
        }
    }
}

impl SweepGrid {
    pub fn points(&self) -> Vec<(&'static str, f64)> {
        let mut v: Vec<(&'static str, f64)> = Vec::new();
        v.extend(self.r.iter().map(|&x| ("r", x)));
        v.extend(self.p.iter().map(|&x| ("p", x)));
        v.extend(self.alpha.iter().map(|&x| ("alpha", x)));
        v.extend(self.ell.iter().map(|&x| ("ell", x as f64)));
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: &'static str,
    pub value: f64,
    pub report: EvalReport,
}

fn apply(base: &PipelineConfig, param: &str, value: f64) -> PipelineConfig {
    let mut c = base.clone();
    match param {
        "r" => c.rps.ratio = value,
        "p" => c.rps.p = value,
        "alpha" => c.gps.alpha = value,
        "ell" => c.gps.ell = value as usize,
        _ => unreachable!("unknown sweep parameter {param}"),
    }
    c
}

/// Detected column ids over all alerts of a window.
fn detected_ids(x: &FeatureMatrix, config: &PipelineConfig) -> Result<(BTreeSet<String>, usize, f64)> {
    let t = Instant::now();
    let r = run_window(x, config)?;
    let secs = t.elapsed().as_secs_f64();
    let ids = r.alerts.iter().flat_map(|a| a.anomalies.iter().cloned()).collect();
    Ok((ids, r.alerts.len(), secs))
}

/// Evaluate every grid point on the injected corpus and the control windows.
pub fn parameter_sweep(
    grid: &SweepGrid,
    corpus: &[Injected],
    control: &[FeatureMatrix],
    base: &PipelineConfig,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (param, value) in grid.points() {
        let config = apply(base, param, value);
        config.validate()?;
        let evals = par::map_slice(corpus, |inj| -> Result<(WindowEval, f64)> {
            let (pre, _, _) = detected_ids(&inj.original(), &config)?;
            let (detected, _, secs) = detected_ids(&inj.window, &config)?;
            Ok((
                WindowEval {
                    detected,
                    injected: inj.truth_ids(),
                    pre_suspicious: pre,
                },
                secs,
            ))
        });
        let mut windows = Vec::with_capacity(evals.len());
        let mut runtimes = Vec::with_capacity(evals.len());
        for e in evals {
            let (w, s) = e?;
            windows.push(w);
            runtimes.push(s);
        }
        let control_alerts = par::map_slice(control, |x| detected_ids(x, &config).map(|(_, a, _)| a))
            .into_iter()
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum();
        rows.push(SweepRow {
            param,
            value,
            report: evaluate(&windows, control_alerts, &runtimes),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_planted_stream, PlantedSpec};

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn evaluate_examples() {
        let perfect = WindowEval {
            detected: set(&["i1", "i2"]),
            injected: set(&["i1", "i2"]),
            ..Default::default()
        };
        let r = evaluate(&[perfect], 0, &[]);
        assert_eq!((r.recall, r.est_accuracy), (Some(1.0), Some(1.0)));

        let none = WindowEval {
            injected: set(&["i1"]),
            ..Default::default()
        };
        let r = evaluate(&[none], 3, &[]);
        assert_eq!((r.recall, r.est_accuracy, r.extra_alerts), (Some(0.0), None, 3));

        let mixed = WindowEval {
            detected: set(&["i1", "i2", "r1", "s1"]),
            injected: set(&["i1", "i2", "i3"]),
            pre_suspicious: set(&["s1"]),
        };
        let r = evaluate(&[mixed], 0, &[]);
        assert_eq!(r.recall, Some(2.0 / 3.0));
        assert_eq!(r.est_accuracy, Some(2.0 / 3.0));
        assert_eq!(evaluate(&[], 0, &[]).recall, None);
    }

    #[test]
    fn injection_is_deterministic_and_in_range() {
        let base = gen_planted_stream(&PlantedSpec::window(1000, 0, 30, 0.1, 0.1), 5)
            .unwrap()
            .value;
        let a = inject_anomalies(&base, Scenario::BigSets, 11, 1.4).unwrap();
        assert_eq!(a, inject_anomalies(&base, Scenario::BigSets, 11, 1.4).unwrap());
        assert!((250..=1000).contains(&a.truth.len()));
        let h = inject_anomalies(&base, Scenario::Hidden, 11, 1.4).unwrap();
        assert!((20..=200).contains(&h.truth.len()));
        assert!(h.strength < 0.1);
    }
}
