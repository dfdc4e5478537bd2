//! Top eigenpair solvers: Lanczos with full reorthogonalization, and power
//! iteration.

use rand::Rng as _;

use super::matrix::{dot, norm, SymMatrix};
use super::tridiag::tridiagonal_eigen;
use crate::error::{Error, Result};
use crate::rng;

/// Below this size Lanczos runs to the full Krylov dimension, which makes the
/// result exact up to rounding.
const SMALL_N: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lanczos,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Relative residual target: `||P v - lambda v|| <= tol * lambda`.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed of the start-vector jitter.
    pub seed: u64,
    pub method: Method,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-6,
            max_iter: 300,
            seed: 0x5EED,
            method: Method::Lanczos,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub lambda1: f64,
    /// Unit norm, largest-magnitude entry positive.
    pub v1: Vec<f64>,
    pub iterations: usize,
    /// `||P v1 - lambda1 v1||_2`.
    pub residual: f64,
    pub converged: bool,
}

/// Largest eigenvalue of `p` and its eigenvector.
pub fn top_eigenpair(p: &SymMatrix, cfg: &SolverConfig) -> Result<EigenResult> {
    let n = p.dim();
    if n == 0 {
        return Err(Error::contract("eigenproblem of an empty matrix"));
    }
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(Error::param("solver needs tol > 0 and max_iter > 0"));
    }
    let (lambda, v, iterations) = match cfg.method {
        Method::Lanczos => lanczos(p, cfg),
        Method::Power => power(p, cfg),
    };
    Ok(finish(p, lambda, v, iterations, cfg.tol))
}

/// All-ones direction plus a little seeded jitter, normalized. A nonnegative
/// matrix's Perron vector is nonnegative, so this never starts orthogonal to it.
fn start_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, n as u64);
    let mut v: Vec<f64> = (0..n).map(|_| 1.0 + 0.05 * (r.random::<f64>() - 0.5)).collect();
    let s = norm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn lanczos(p: &SymMatrix, cfg: &SolverConfig) -> (f64, Vec<f64>, usize) {
    let n = p.dim();
    let kmax = if n <= SMALL_N { n } else { n.min(cfg.max_iter) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(kmax);
    let mut alpha: Vec<f64> = Vec::with_capacity(kmax);
    let mut beta: Vec<f64> = Vec::with_capacity(kmax);
    let mut w = vec![0.0; n];
    let mut q = start_vector(n, cfg.seed);
    let mut ritz = (0.0, vec![1.0]);

    for j in 0..kmax {
        p.matvec(&q, &mut w);
        let a = dot(&q, &w);
        alpha.push(a);
        basis.push(q);
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bj = norm(&w);
        let m = j + 1;
        let check = n <= SMALL_N || m <= 32 || m % 8 == 0 || m == kmax;
        let breakdown = bj <= 1e-13 * alpha.iter().fold(1.0f64, |s, x| s.max(x.abs()));
        if check || breakdown {
            let (vals, vecs) = tridiagonal_eigen(&alpha, &beta);
            let top = m - 1;
            let s: Vec<f64> = (0..m).map(|r| vecs[r * m + top]).collect();
            let theta = vals[top];
            let est = bj * s[m - 1].abs();
            ritz = (theta, s);
            let small_done = n <= SMALL_N && m == kmax;
            if breakdown || small_done || (n > SMALL_N && est <= 0.1 * cfg.tol * theta.abs()) {
                break;
            }
        }
        if m == kmax {
            break;
        }
        beta.push(bj);
        q = w.iter().map(|x| x / bj).collect();
    }

    let (theta, s) = ritz;
    let mut v = vec![0.0; n];
    for (b, c) in basis.iter().zip(&s) {
        v.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
    }
    (theta, v, basis.len())
}

fn power(p: &SymMatrix, cfg: &SolverConfig) -> (f64, Vec<f64>, usize) {
    let n = p.dim();
    let mut v = start_vector(n, cfg.seed);
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    let mut it = 0;
    while it < cfg.max_iter {
        it += 1;
        p.matvec(&v, &mut w);
        lambda = dot(&v, &w);
        let res = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        let s = norm(&w);
        if res <= cfg.tol * lambda.abs() || s == 0.0 {
            break;
        }
        v.iter_mut().zip(&w).for_each(|(x, y)| *x = y / s);
    }
    (lambda, v, it)
}

fn finish(p: &SymMatrix, lambda: f64, mut v: Vec<f64>, iterations: usize, tol: f64) -> EigenResult {
    let s = norm(&v);
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    let pivot = v
        .iter()
        .enumerate()
        .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let mut w = vec![0.0; v.len()];
    p.matvec(&v, &mut w);
    let residual = w
        .iter()
        .zip(&v)
        .map(|(a, b)| (a - lambda * b).powi(2))
        .sum::<f64>()
        .sqrt();
    let converged = residual <= tol * lambda.abs() || residual <= 1e-14 * lambda.abs().max(1.0);
    EigenResult {
        lambda1: lambda,
        v1: v,
        iterations,
        residual,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(p: &SymMatrix) -> EigenResult {
        top_eigenpair(p, &SolverConfig::default()).unwrap()
    }

    #[test]
    fn identity_and_all_ones() {
        let r = solve(&SymMatrix::identity(2));
        assert!((r.lambda1 - 1.0).abs() < 1e-12);
        assert!((norm(&r.v1) - 1.0).abs() < 1e-12);

        let r = solve(&SymMatrix::constant(7, 1.0));
        assert!((r.lambda1 - 7.0).abs() < 1e-10);
        for x in &r.v1 {
            assert!((x - 1.0 / 7f64.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn large_block_matches_closed_form() {
        // Unit diagonal, a k-block at c, zero elsewhere: lambda = 1 + c (k - 1).
        let (n, k, c) = (150, 40, 0.85);
        let p = SymMatrix::from_upper(n, 1.0, |_, j| if j < k { c } else { 0.0 });
        let r = solve(&p);
        assert!(r.converged);
        assert!((r.lambda1 - (1.0 + c * (k - 1) as f64)).abs() < 1e-8);
        assert!(r.residual <= 1e-6 * r.lambda1);
    }

    #[test]
    fn power_method_agrees_on_gapped_matrix() {
        let p = SymMatrix::from_upper(90, 1.0, |i, j| 0.3 + 0.1 * ((i * j) % 3) as f64);
        let cfg = SolverConfig {
            method: Method::Power,
            tol: 1e-10,
            max_iter: 5000,
            ..Default::default()
        };
        let a = top_eigenpair(&p, &cfg).unwrap();
        let b = solve(&p);
        assert!(a.converged);
        assert!((a.lambda1 - b.lambda1).abs() < 1e-8 * b.lambda1);
    }

    #[test]
    fn zero_matrix_is_handled() {
        let p = SymMatrix::constant(5, 0.0);
        let r = solve(&p);
        assert_eq!(r.lambda1, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let p = SymMatrix::from_upper(120, 1.0, |i, j| ((i + 3 * j) % 7) as f64 / 7.0);
        assert_eq!(solve(&p), solve(&p));
    }
}
