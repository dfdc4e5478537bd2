use std::time::Instant;

use super::{gen_planted_matrix, gen_planted_stream, GrowthRule, PlantedSpec};
use crate::corrmat::build_correlation_matrix;
use crate::error::Result;
use crate::gps::{update_labels, GpsModel};
use crate::pipeline::{direct_detect, PipelineConfig};
use crate::rng;
use crate::rps::rps_detect;
use crate::spectral::{principal_score, SolverConfig};

/// Limit of the principal score when a fraction `phi` of the columns is
/// planted: `mu + (mu_tilde - mu) phi^2`.
pub fn predicted_rho(mu: f64, mu_tilde: f64, phi: f64) -> f64 {
    mu + (mu_tilde - mu) * phi * phi
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegenerationRow {
    pub n: usize,
    pub k: usize,
    /// Mean principal score over the trials.
    pub rho: f64,
    /// Sample standard deviation over the trials.
    pub rho_sd: f64,
    pub predicted_rho: f64,
}

/// Mean principal score of planted matrices as the size grows with the
/// anomaly count following `rule`. Trials run one after another; each matrix
/// is generated with row-parallelism.
pub fn degeneration_curve(
    rule: GrowthRule,
    grid: &[usize],
    mu: f64,
    mu_tilde: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<DegenerationRow>> {
    let solver = SolverConfig::default();
    let mut out = Vec::with_capacity(grid.len());
    for &n in grid {
        let k = rule.count(n);
        let spec = PlantedSpec::matrix(n, k, mu, mu_tilde);
        let mut rhos = Vec::with_capacity(trials);
        for t in 0..trials {
            let s = rng::derive(seed, ((n as u64) << 20) | t as u64);
            let p = gen_planted_matrix(&spec, s)?;
            rhos.push(principal_score(p.value.matrix(), &solver)?.rho);
        }
        let (mean, sd) = mean_sd(&rhos);
        out.push(DegenerationRow {
            n,
            k,
            rho: mean,
            rho_sd: sd,
            predicted_rho: predicted_rho(mu, mu_tilde, k as f64 / n as f64),
        });
    }
    Ok(out)
}

pub(crate) fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, v.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationRow {
    pub phi: f64,
    pub trial: usize,
    pub n: usize,
    pub k: usize,
    pub rho: f64,
    pub predicted_rho: f64,
    /// `|rho - predicted| <= 5 / sqrt(n)`.
    pub within_band: bool,
}

/// One planted matrix per trial for every planted fraction `phi`.
pub fn concentration(
    phis: &[f64],
    n: usize,
    mu: f64,
    mu_tilde: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<ConcentrationRow>> {
    let solver = SolverConfig::default();
    let band = 5.0 / (n as f64).sqrt();
    let mut out = Vec::new();
    for (pi, &phi) in phis.iter().enumerate() {
        let k = GrowthRule::Fraction(phi).count(n);
        let spec = PlantedSpec::matrix(n, k, mu, mu_tilde);
        let predicted = predicted_rho(mu, mu_tilde, phi);
        for t in 0..trials {
            let s = rng::derive(seed, ((pi as u64) << 32) | t as u64);
            let p = gen_planted_matrix(&spec, s)?;
            let rho = principal_score(p.value.matrix(), &solver)?.rho;
            out.push(ConcentrationRow {
                phi,
                trial: t,
                n,
                k,
                rho,
                predicted_rho: predicted,
                within_band: (rho - predicted).abs() <= band,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    /// Correlation matrix plus principal score and membership, seconds.
    pub direct_secs: f64,
    pub rps_secs: f64,
    /// One label sweep of the generative model, seconds.
    pub gps_sweep_secs: f64,
}

/// Runtime of each detector as the window widens. Windows are planted data
/// windows with `rows` rows and 5% planted columns at strength 0.3; each
/// timing is the median of `reps` runs.
pub fn scaling(ns: &[usize], rows: usize, reps: usize, seed: u64) -> Result<Vec<ScalingRow>> {
    let reps = reps.max(1);
    let config = PipelineConfig::default();
    let mut out = Vec::new();
    for &n in ns {
        let k = (n / 20).max(2);
        let spec = PlantedSpec::window(n, k, rows, 0.3, 0.85).with_strength(0.3);
        let w = gen_planted_stream(&spec, rng::derive(seed, n as u64))?;
        let x = &w.value;

        let mut direct = Vec::with_capacity(reps);
        let mut rps = Vec::with_capacity(reps);
        let mut sweep = Vec::with_capacity(reps);
        let bg = config.gps.ell;
        let mut z = vec![bg; n];
        for &j in &w.truth {
            z[j] = 0;
        }
        let model = GpsModel {
            a: vec![17.0, 15.0, 1.5],
            b: vec![3.0, 5.0, 3.5],
            z,
            loglik: 0.0,
        };
        for _ in 0..reps {
            let t = Instant::now();
            let p = build_correlation_matrix(x, config.mode)?;
            direct_detect(x, &p, &config)?;
            direct.push(t.elapsed().as_secs_f64());

            let t = Instant::now();
            rps_detect(x, &config.rps)?;
            rps.push(t.elapsed().as_secs_f64());

            let mut m = model.clone();
            let t = Instant::now();
            update_labels(&p, &mut m, config.gps.eps);
            sweep.push(t.elapsed().as_secs_f64());
        }
        out.push(ScalingRow {
            n,
            direct_secs: median(&mut direct),
            rps_secs: median(&mut rps),
            gps_sweep_secs: median(&mut sweep),
        });
    }
    Ok(out)
}

pub(crate) fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_grid_gives_one_row() {
        let rows = degeneration_curve(GrowthRule::Power(0.8), &[100], 0.5, 0.85, 2, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].k, 40);
    }

    #[test]
    fn full_planting_scores_near_anomaly_mean() {
        let rows = degeneration_curve(GrowthRule::Fraction(1.0), &[400], 0.3, 0.85, 2, 4).unwrap();
        assert!((rows[0].rho - 0.85).abs() < 0.02, "{}", rows[0].rho);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
