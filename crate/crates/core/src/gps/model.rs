use statrs::function::gamma::ln_gamma;

use super::special::{inv_digamma, psi};
use crate::corrmat::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;
use crate::par;
use crate::rps::{strength_from_norms, Algorithm, Detection};
use crate::spectral::{principal_score, SolverConfig};

/// Upper cap on either beta shape parameter.
pub const SHAPE_MAX: f64 = 1e4;
/// Mean ceiling of the background group.
pub const BACKGROUND_MEAN_MAX: f64 = 0.5;
/// Concentration given to groups initialized without usable moments.
const DEFAULT_CONCENTRATION: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GpsConfig {
    /// Number of anomaly groups `l`.
    pub ell: usize,
    /// Mean floor `a / (a + b) >= alpha` of every anomaly group.
    pub alpha: f64,
    pub max_iter: usize,
    /// Relative log-likelihood change that counts as converged.
    pub ll_tol: f64,
    /// Correlations are clamped to `[eps, 1 - eps]` before taking logs.
    pub eps: f64,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// Minimum correlation for a neighbor to join a seed in the fallback
    /// initialization.
    pub seed_cutoff: f64,
    /// Seed groups left empty by the supplied initialization with the
    /// fallback rule over the still-unassigned columns.
    pub fill_unseeded: bool,
    pub solver: SolverConfig,
}

impl Default for GpsConfig {
    fn default() -> Self {
        GpsConfig {
            ell: 2,
            alpha: 0.75,
            max_iter: 100,
            ll_tol: 1e-6,
            eps: 1e-6,
            inner_tol: 1e-8,
            inner_max_iter: 50,
            seed_cutoff: 0.7,
            fill_unseeded: false,
            solver: SolverConfig::default(),
        }
    }
}

impl GpsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ell < 1 {
            return Err(Error::param("gps.ell must be at least 1"));
        }
        if !(self.alpha > 0.5 && self.alpha < 1.0) {
            return Err(Error::param(format!(
                "gps.alpha must be in (0.5, 1), got {}",
                self.alpha
            )));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::param(format!("gps.eps must be in (0, 0.5), got {}", self.eps)));
        }
        if !(self.ll_tol >= 0.0) {
            return Err(Error::param("gps.ll_tol must be nonnegative"));
        }
        Ok(())
    }
}

/// Beta mixture over correlation-matrix entries.
///
/// Groups `0..ell` are anomaly groups; group `ell` is the background. A pair
/// of columns belongs to group `g < ell` when both columns carry label `g`,
/// and to the background otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct GpsModel {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub z: Vec<usize>,
    pub loglik: f64,
}

impl GpsModel {
    pub fn ell(&self) -> usize {
        self.a.len() - 1
    }

    pub fn background(&self) -> usize {
        self.ell()
    }

    pub fn mean(&self, g: usize) -> f64 {
        self.a[g] / (self.a[g] + self.b[g])
    }

    /// Column indices carrying label `g`, ascending.
    pub fn members(&self, g: usize) -> Vec<usize> {
        (0..self.z.len()).filter(|&i| self.z[i] == g).collect()
    }

    /// Check the parameter constraints for anomaly mean floor `alpha`.
    pub fn constraints_hold(&self, alpha: f64) -> bool {
        let tol = 1e-9;
        (0..self.a.len()).all(|g| {
            let (a, b) = (self.a[g], self.b[g]);
            let mean_ok = if g == self.background() {
                self.mean(g) <= BACKGROUND_MEAN_MAX + tol
            } else {
                self.mean(g) >= alpha - tol
            };
            a > 0.0 && b > 0.0 && a + b >= 1.0 - tol && mean_ok
        })
    }
}

/// Sufficient statistics of the correlations owned by each group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    /// Columns per group.
    pub members: Vec<usize>,
    /// Correlations (column pairs) per group.
    pub pairs: Vec<f64>,
    pub sum_ln: Vec<f64>,
    pub sum_ln1m: Vec<f64>,
    pub sum_w: Vec<f64>,
    pub sum_w2: Vec<f64>,
}

#[inline]
fn clamp(w: f64, eps: f64) -> f64 {
    w.clamp(eps, 1.0 - eps)
}

/// Pair sums over the whole upper triangle, the background's starting point.
#[derive(Debug, Clone, Copy)]
struct Totals {
    pairs: f64,
    ln: f64,
    ln1m: f64,
    w: f64,
    w2: f64,
}

fn totals(p: &CorrelationMatrix, eps: f64) -> Totals {
    let n = p.n();
    let rows = par::map_range(n, |i| {
        let row = p.matrix().row(i);
        let mut t = [0.0; 4];
        for &w in &row[i + 1..] {
            let w = clamp(w, eps);
            t[0] += w.ln();
            t[1] += (1.0 - w).ln();
            t[2] += w;
            t[3] += w * w;
        }
        t
    });
    let mut s = [0.0; 4];
    for t in rows {
        for k in 0..4 {
            s[k] += t[k];
        }
    }
    Totals {
        pairs: (n * n.saturating_sub(1) / 2) as f64,
        ln: s[0],
        ln1m: s[1],
        w: s[2],
        w2: s[3],
    }
}

fn group_stats_with(p: &CorrelationMatrix, z: &[usize], ell: usize, eps: f64, tot: Totals) -> GroupStats {
    let mut st = GroupStats {
        members: vec![0; ell + 1],
        pairs: vec![0.0; ell + 1],
        sum_ln: vec![0.0; ell + 1],
        sum_ln1m: vec![0.0; ell + 1],
        sum_w: vec![0.0; ell + 1],
        sum_w2: vec![0.0; ell + 1],
    };
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); ell];
    for (i, &g) in z.iter().enumerate() {
        st.members[g] += 1;
        if g < ell {
            groups[g].push(i);
        }
    }
    for (g, mem) in groups.iter().enumerate() {
        for (x, &i) in mem.iter().enumerate() {
            let row = p.matrix().row(i);
            for &j in &mem[x + 1..] {
                let w = clamp(row[j], eps);
                st.sum_ln[g] += w.ln();
                st.sum_ln1m[g] += (1.0 - w).ln();
                st.sum_w[g] += w;
                st.sum_w2[g] += w * w;
            }
        }
        let k = mem.len() as f64;
        st.pairs[g] = k * (k - 1.0) / 2.0;
    }
    let bg = ell;
    st.pairs[bg] = tot.pairs - st.pairs[..ell].iter().sum::<f64>();
    st.sum_ln[bg] = tot.ln - st.sum_ln[..ell].iter().sum::<f64>();
    st.sum_ln1m[bg] = tot.ln1m - st.sum_ln1m[..ell].iter().sum::<f64>();
    st.sum_w[bg] = tot.w - st.sum_w[..ell].iter().sum::<f64>();
    st.sum_w2[bg] = tot.w2 - st.sum_w2[..ell].iter().sum::<f64>();
    st
}

/// Statistics of every group under labels `z` (background label `ell`).
pub fn group_stats(p: &CorrelationMatrix, z: &[usize], ell: usize, eps: f64) -> GroupStats {
    group_stats_with(p, z, ell, eps, totals(p, eps))
}

/// `ln B(a, b)^-1`, the log normalizer of the beta density.
#[inline]
fn log_norm(a: f64, b: f64) -> f64 {
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)
}

/// Log-likelihood contribution of one group.
fn group_term(a: f64, b: f64, pairs: f64, sum_ln: f64, sum_ln1m: f64) -> f64 {
    if pairs == 0.0 {
        return 0.0;
    }
    (a - 1.0) * sum_ln + (b - 1.0) * sum_ln1m + pairs * log_norm(a, b)
}

pub fn log_likelihood_from_stats(a: &[f64], b: &[f64], stats: &GroupStats) -> f64 {
    (0..a.len())
        .map(|g| group_term(a[g], b[g], stats.pairs[g], stats.sum_ln[g], stats.sum_ln1m[g]))
        .sum()
}

/// Log-likelihood of all upper-triangle correlations of `p` under `model`.
pub fn log_likelihood(p: &CorrelationMatrix, model: &GpsModel, eps: f64) -> f64 {
    let stats = group_stats(p, &model.z, model.ell(), eps);
    log_likelihood_from_stats(&model.a, &model.b, &stats)
}

/// Mean constraint applied after each fixed-point step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanConstraint {
    None,
    AtLeast(f64),
    AtMost(f64),
}

/// Move `(a, b)` onto the feasible set: the bound side of the mean is fixed by
/// rescaling one shape, `a + b >= 1` by scaling both up, and both shapes are
/// capped at [`SHAPE_MAX`] by scaling both down. Returns whether the cap bit.
pub fn project(a: &mut f64, b: &mut f64, constraint: MeanConstraint) -> bool {
    match constraint {
        MeanConstraint::AtLeast(alpha) if *a / (*a + *b) < alpha => *b = *a * (1.0 - alpha) / alpha,
        MeanConstraint::AtMost(beta) if *a / (*a + *b) > beta => *a = *b * beta / (1.0 - beta),
        _ => {}
    }
    let s = *a + *b;
    if s < 1.0 {
        *a /= s;
        *b /= s;
    }
    let hi = a.max(*b);
    if hi > SHAPE_MAX {
        let k = SHAPE_MAX / hi;
        *a *= k;
        *b *= k;
        return true;
    }
    false
}

/// Result of fitting one group's beta shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaFit {
    pub a: f64,
    pub b: f64,
    pub iterations: usize,
    /// A shape ran into [`SHAPE_MAX`] (the correlations are nearly identical).
    pub capped: bool,
}

/// Fixed-point maximum-likelihood fit of beta shapes from `mean ln w` and
/// `mean ln (1 - w)`, projected onto `constraint` after every step.
pub fn fit_beta(
    mean_ln: f64,
    mean_ln1m: f64,
    a0: f64,
    b0: f64,
    constraint: MeanConstraint,
    tol: f64,
    max_iter: usize,
) -> BetaFit {
    let (mut a, mut b) = (a0, b0);
    let mut capped = project(&mut a, &mut b, constraint);
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let base = psi(a + b);
        let mut na = inv_digamma(base + mean_ln);
        let mut nb = inv_digamma(base + mean_ln1m);
        capped = project(&mut na, &mut nb, constraint);
        let step = (na - a).abs().max((nb - b).abs());
        a = na;
        b = nb;
        if step <= tol * a.max(b).max(1.0) {
            break;
        }
    }
    BetaFit {
        a,
        b,
        iterations: it,
        capped,
    }
}

fn constraint_for(g: usize, ell: usize, alpha: f64) -> MeanConstraint {
    if g == ell {
        MeanConstraint::AtMost(BACKGROUND_MEAN_MAX)
    } else {
        MeanConstraint::AtLeast(alpha)
    }
}

/// Outcome of one beta update over all groups.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BetaUpdate {
    /// Groups whose parameters hit the shape cap.
    pub capped: Vec<usize>,
    /// Groups skipped because they own no correlations.
    pub frozen: Vec<usize>,
}

/// Refit every nonempty group's shapes to its correlations.
///
/// A refit is kept only when it does not lower that group's likelihood term,
/// so the update never decreases the total log-likelihood.
pub fn update_beta_params(model: &mut GpsModel, stats: &GroupStats, config: &GpsConfig) -> BetaUpdate {
    let ell = model.ell();
    let mut out = BetaUpdate::default();
    for g in 0..=ell {
        let m = stats.pairs[g];
        if m < 1.0 {
            out.frozen.push(g);
            continue;
        }
        let fit = fit_beta(
            stats.sum_ln[g] / m,
            stats.sum_ln1m[g] / m,
            model.a[g],
            model.b[g],
            constraint_for(g, ell, config.alpha),
            config.inner_tol,
            config.inner_max_iter,
        );
        let old = group_term(model.a[g], model.b[g], m, stats.sum_ln[g], stats.sum_ln1m[g]);
        let new = group_term(fit.a, fit.b, m, stats.sum_ln[g], stats.sum_ln1m[g]);
        if new >= old {
            model.a[g] = fit.a;
            model.b[g] = fit.b;
        }
        if fit.capped {
            out.capped.push(g);
        }
    }
    out
}

/// Sweep over the columns in order, moving each to the label that maximizes
/// the log-likelihood given every other label (later columns see earlier
/// moves). Ties go to the background. Returns the number of changed labels.
///
/// Only correlations between the column and current group members change
/// owner when a label changes, so each candidate costs the size of its group.
pub fn update_labels(p: &CorrelationMatrix, model: &mut GpsModel, eps: f64) -> usize {
    let ell = model.ell();
    let bg = ell;
    let mut groups: Vec<Vec<usize>> = (0..ell).map(|g| model.members(g)).collect();
    let da: Vec<f64> = (0..ell).map(|g| model.a[g] - model.a[bg]).collect();
    let db: Vec<f64> = (0..ell).map(|g| model.b[g] - model.b[bg]).collect();
    let bg_norm = log_norm(model.a[bg], model.b[bg]);
    let dc: Vec<f64> = (0..ell).map(|g| log_norm(model.a[g], model.b[g]) - bg_norm).collect();

    let mut changed = 0;
    for i in 0..model.z.len() {
        let row = p.matrix().row(i);
        let mut best = bg;
        let mut best_score = 0.0;
        for g in 0..ell {
            let mut s = 0.0;
            let mut k = 0.0;
            for &j in &groups[g] {
                if j == i {
                    continue;
                }
                let w = clamp(row[j], eps);
                s += da[g] * w.ln() + db[g] * (1.0 - w).ln();
                k += 1.0;
            }
            s += k * dc[g];
            if s > best_score {
                best_score = s;
                best = g;
            }
        }
        let old = model.z[i];
        if best != old {
            if old < ell {
                groups[old].retain(|&j| j != i);
            }
            if best < ell {
                let pos = groups[best].partition_point(|&j| j < i);
                groups[best].insert(pos, i);
            }
            model.z[i] = best;
            changed += 1;
        }
    }
    changed
}

/// Initial shapes by moments: mean of the group's correlations and the
/// concentration implied by their variance, then projected.
fn moment_shapes(stats: &GroupStats, g: usize, constraint: MeanConstraint) -> (f64, f64) {
    let m = stats.pairs[g];
    let mean = if m > 0.0 { stats.sum_w[g] / m } else { f64::NAN };
    let (mean, conc) = if mean.is_finite() {
        let var = stats.sum_w2[g] / m - mean * mean;
        let k = mean * (1.0 - mean) / var - 1.0;
        (
            mean,
            if k.is_finite() && k > 0.0 {
                k
            } else {
                DEFAULT_CONCENTRATION
            },
        )
    } else {
        let mean = match constraint {
            MeanConstraint::AtLeast(alpha) => alpha,
            MeanConstraint::AtMost(beta) => beta,
            MeanConstraint::None => 0.5,
        };
        (mean, DEFAULT_CONCENTRATION)
    };
    let mean = mean.clamp(1e-3, 1.0 - 1e-3);
    let (mut a, mut b) = (mean * conc, (1.0 - mean) * conc);
    project(&mut a, &mut b, constraint);
    (a, b)
}

/// Seed groups from the columns with the largest row sums: each seed takes its
/// unassigned neighbors with correlation above `cutoff`. Seeds without such a
/// neighbor are skipped. Only labels equal to `bg` are overwritten.
fn seed_groups(p: &CorrelationMatrix, z: &mut [usize], groups: &[usize], bg: usize, cutoff: f64) {
    let n = p.n();
    let sums = p.matrix().row_sums();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| sums[y].total_cmp(&sums[x]).then(x.cmp(&y)));
    let mut pending = groups.iter().copied();
    let Some(mut g) = pending.next() else { return };
    for &s in &order {
        if z[s] != bg {
            continue;
        }
        let row = p.matrix().row(s);
        let members: Vec<usize> = (0..n).filter(|&j| j != s && z[j] == bg && row[j] > cutoff).collect();
        if members.is_empty() {
            continue;
        }
        z[s] = g;
        for j in members {
            z[j] = g;
        }
        match pending.next() {
            Some(next) => g = next,
            None => return,
        }
    }
}

/// One detected anomaly group.
#[derive(Debug, Clone, PartialEq)]
pub struct GpsSet {
    pub group: usize,
    pub indices: Vec<usize>,
    /// Principal score of the group's own correlation submatrix.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpsFit {
    pub model: GpsModel,
    pub initial_loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Groups whose shapes hit the cap at some point.
    pub capped: Vec<usize>,
    /// Anomaly groups with at least two members, by group index.
    pub sets: Vec<GpsSet>,
}

impl GpsFit {
    /// Detections for the fitted sets, with strength measured on `x` under
    /// norm order `p`.
    pub fn detections(&self, x: &FeatureMatrix, p: f64, window_id: usize) -> Vec<Detection> {
        let norms = crate::rps::column_norms(x, p);
        self.sets
            .iter()
            .map(|s| Detection {
                window_id,
                algorithm: Algorithm::Gps,
                score: s.score,
                anomalies: s.indices.iter().map(|&j| x.col_ids()[j].clone()).collect(),
                strength: strength_from_norms(&s.indices, &norms),
                indices: s.indices.clone(),
                degenerate: false,
            })
            .collect()
    }
}

/// Fit the beta mixture to `p`.
///
/// `init` lists column sets to start the first anomaly groups from (normally
/// the randomized detector's output); sets beyond `ell` are ignored and a
/// column listed twice keeps its first set. Without `init`, or for groups it
/// leaves empty when `fill_unseeded` is set, groups are seeded from
/// high-row-sum columns and their strongly correlated neighbors.
pub fn gps_fit(p: &CorrelationMatrix, config: &GpsConfig, init: Option<&[Vec<usize>]>) -> Result<GpsFit> {
    config.validate()?;
    let n = p.n();
    let ell = config.ell;
    let bg = ell;
    let mut z = vec![bg; n];
    let mut seeded = 0;
    if let Some(sets) = init {
        for set in sets.iter().filter(|s| !s.is_empty()).take(ell) {
            for &i in set {
                if i >= n {
                    return Err(Error::contract(format!("initial set names column {i} of {n}")));
                }
                if z[i] == bg {
                    z[i] = seeded;
                }
            }
            seeded += 1;
        }
    }
    if init.is_none() || config.fill_unseeded {
        let rest: Vec<usize> = (seeded..ell).collect();
        seed_groups(p, &mut z, &rest, bg, config.seed_cutoff);
    }

    let tot = totals(p, config.eps);
    let stats = group_stats_with(p, &z, ell, config.eps, tot);
    let mut a = vec![0.0; ell + 1];
    let mut b = vec![0.0; ell + 1];
    for g in 0..=ell {
        (a[g], b[g]) = moment_shapes(&stats, g, constraint_for(g, ell, config.alpha));
    }
    let initial_loglik = log_likelihood_from_stats(&a, &b, &stats);
    let mut model = GpsModel {
        a,
        b,
        z,
        loglik: initial_loglik,
    };

    let mut capped = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut prev = initial_loglik;
    while iterations < config.max_iter {
        iterations += 1;
        let stats = group_stats_with(p, &model.z, ell, config.eps, tot);
        let upd = update_beta_params(&mut model, &stats, config);
        for g in upd.capped {
            if !capped.contains(&g) {
                capped.push(g);
            }
        }
        let changed = update_labels(p, &mut model, config.eps);
        let stats = group_stats_with(p, &model.z, ell, config.eps, tot);
        model.loglik = log_likelihood_from_stats(&model.a, &model.b, &stats);
        let rel = (model.loglik - prev).abs() / prev.abs().max(1e-300);
        prev = model.loglik;
        if changed == 0 && rel <= config.ll_tol {
            converged = true;
            break;
        }
    }

    let mut sets = Vec::new();
    for g in 0..ell {
        let indices = model.members(g);
        if indices.len() < 2 {
            continue;
        }
        let sub = p.submatrix(&indices);
        let score = principal_score(sub.matrix(), &config.solver)?.rho;
        sets.push(GpsSet {
            group: g,
            indices,
            score,
        });
    }
    Ok(GpsFit {
        model,
        initial_loglik,
        iterations,
        converged,
        capped,
        sets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrmat::SignMode;
    use crate::spectral::SymMatrix;

    fn corr(n: usize, f: impl Fn(usize, usize) -> f64 + Sync + Send) -> CorrelationMatrix {
        let m = SymMatrix::from_upper(n, 1.0, f);
        CorrelationMatrix::new(m, SignMode::Absolute, (0..n).map(|i| i.to_string()).collect()).unwrap()
    }

    #[test]
    fn uniform_model_has_zero_loglik() {
        let p = corr(6, |i, j| ((i + j) % 5) as f64 / 5.0 + 0.1);
        let model = GpsModel {
            a: vec![1.0; 3],
            b: vec![1.0; 3],
            z: vec![0, 0, 1, 1, 2, 2],
            loglik: 0.0,
        };
        assert!(log_likelihood(&p, &model, 1e-6).abs() < 1e-12);
    }

    #[test]
    fn single_pair_density() {
        let p = corr(2, |_, _| 0.5);
        let model = GpsModel {
            a: vec![2.0, 2.0],
            b: vec![2.0, 2.0],
            z: vec![1, 1],
            loglik: 0.0,
        };
        assert!((log_likelihood(&p, &model, 1e-6) - 1.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn projection_binds_on_the_boundary() {
        let (mut a, mut b) = (3.0, 2.0);
        project(&mut a, &mut b, MeanConstraint::AtLeast(0.75));
        assert!((a / (a + b) - 0.75).abs() < 1e-15);
        let (mut a, mut b) = (9.0, 1.0);
        project(&mut a, &mut b, MeanConstraint::AtMost(0.5));
        assert!((a / (a + b) - 0.5).abs() < 1e-15);
        let (mut a, mut b) = (0.2, 0.1);
        project(&mut a, &mut b, MeanConstraint::None);
        assert!((a + b - 1.0).abs() < 1e-15);
        let (mut a, mut b) = (4e4, 1e4);
        assert!(project(&mut a, &mut b, MeanConstraint::None));
        assert!(a <= SHAPE_MAX && (a / (a + b) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn lone_column_goes_to_background() {
        let p = corr(1, |_, _| 0.0);
        let mut model = GpsModel {
            a: vec![15.0, 1.0],
            b: vec![5.0, 1.0],
            z: vec![0],
            loglik: 0.0,
        };
        update_labels(&p, &mut model, 1e-6);
        assert_eq!(model.z, vec![1]);
    }

    #[test]
    fn unstructured_matrix_yields_no_sets() {
        let p = corr(40, |i, j| 0.05 + 0.1 * (((i * 31 + j * 17) % 11) as f64 / 11.0));
        let fit = gps_fit(&p, &GpsConfig::default(), None).unwrap();
        assert!(fit.sets.is_empty());
        assert!(fit.model.z.iter().all(|&g| g == 2));
    }
}
