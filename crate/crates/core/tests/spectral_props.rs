use corrwatch::corrmat::{build_correlation_matrix, SignMode};
use corrwatch::ingest::FeatureMatrix;
use corrwatch::rng;
use corrwatch::spectral::{
    membership_scores, norm, principal_score, row_sum_bounds, top_eigenpair, tridiagonal_eigen, Method, SolverConfig,
    SymMatrix,
};
use corrwatch::synth::{gen_planted_stream, PlantedSpec};
use proptest::prelude::*;
use rand::Rng as _;
use rand_distr::StandardNormal;

fn nonnegative_symmetric() -> impl Strategy<Value = SymMatrix> {
    (1usize..40).prop_flat_map(|n| {
        prop::collection::vec(0.0f64..1.0, n * (n + 1) / 2).prop_map(move |upper| {
            let mut it = upper.into_iter();
            let mut data = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = it.next().unwrap();
                    data[i * n + j] = v;
                    data[j * n + i] = v;
                }
            }
            SymMatrix::new(n, data).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn perron_frobenius_sandwich(p in nonnegative_symmetric()) {
        for method in [Method::Lanczos, Method::Power] {
            let cfg = SolverConfig { method, tol: 1e-10, max_iter: 5000, ..SolverConfig::default() };
            let ps = principal_score(&p, &cfg).unwrap();
            let (lo, hi) = row_sum_bounds(&p);
            prop_assert!(lo - 1e-9 <= ps.rho && ps.rho <= hi + 1e-9, "{} not in [{}, {}]", ps.rho, lo, hi);
            prop_assert!((norm(&ps.eigen.v1) - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn two_by_two_closed_form(a in 0.0f64..5.0, b in 0.0f64..5.0, c in 0.0f64..5.0) {
        let p = SymMatrix::new(2, vec![a, b, b, c]).unwrap();
        let e = top_eigenpair(&p, &SolverConfig::default()).unwrap();
        let want = 0.5 * (a + c) + (0.25 * (a - c).powi(2) + b * b).sqrt();
        prop_assert!((e.lambda1 - want).abs() <= 1e-12 * want.max(1.0), "{} vs {}", e.lambda1, want);
    }

    #[test]
    fn residual_meets_tolerance(p in nonnegative_symmetric()) {
        let cfg = SolverConfig::default();
        let e = top_eigenpair(&p, &cfg).unwrap();
        if e.lambda1 > 0.0 {
            prop_assert!(e.residual <= cfg.tol * e.lambda1 + 1e-12);
        }
    }

    #[test]
    fn tridiagonal_eigenvalues_preserve_trace_and_order(
        diag in prop::collection::vec(-3.0f64..3.0, 1..30),
        seed in any::<u64>(),
    ) {
        let mut r = rng::from_seed(seed);
        let off: Vec<f64> = (1..diag.len()).map(|_| r.random_range(-1.0..1.0)).collect();
        let (vals, _) = tridiagonal_eigen(&diag, &off);
        let trace: f64 = diag.iter().sum();
        prop_assert!((vals.iter().sum::<f64>() - trace).abs() <= 1e-10 * (1.0 + trace.abs()));
        let sq: f64 = diag.iter().map(|d| d * d).sum::<f64>() + 2.0 * off.iter().map(|o| o * o).sum::<f64>();
        prop_assert!((vals.iter().map(|v| v * v).sum::<f64>() - sq).abs() <= 1e-9 * (1.0 + sq));
    }
}

#[test]
fn identity_and_all_ones_scores() {
    for n in [1, 7, 64, 65, 300] {
        let id = principal_score(&SymMatrix::identity(n), &SolverConfig::default()).unwrap();
        assert!((id.rho - 1.0 / n as f64).abs() < 1e-12);
        let ones = principal_score(&SymMatrix::constant(n, 1.0), &SolverConfig::default()).unwrap();
        assert!((ones.rho - 1.0).abs() < 1e-9);
    }
}

#[test]
fn same_seed_same_eigenpair() {
    let p = corrwatch::synth::gen_planted_matrix(&PlantedSpec::matrix(200, 20, 0.3, 0.85), 5)
        .unwrap()
        .value;
    let cfg = SolverConfig::default();
    assert_eq!(
        top_eigenpair(p.matrix(), &cfg).unwrap(),
        top_eigenpair(p.matrix(), &cfg).unwrap()
    );
}

#[test]
fn identical_columns_are_all_members() {
    let base: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin()).collect();
    let x = FeatureMatrix::from_columns(&vec![base; 6]).unwrap();
    let p = build_correlation_matrix(&x, SignMode::Absolute).unwrap();
    let ps = principal_score(p.matrix(), &SolverConfig::default()).unwrap();
    assert!((ps.rho - 1.0).abs() < 1e-9);
    let m = membership_scores(&x, &ps.eigen, SignMode::Absolute).unwrap();
    assert!(m.scores.iter().all(|s| (s - 1.0).abs() < 1e-9));
}

#[test]
fn column_orthogonal_to_block_scores_near_zero() {
    // Block columns share a factor; the last column is built orthogonal to
    // every block column by Gram-Schmidt against the block's span.
    let mut r = rng::from_seed(8);
    let m = 80;
    let factor: Vec<f64> = (0..m).map(|_| r.sample(StandardNormal)).collect();
    let mut cols: Vec<Vec<f64>> = (0..10)
        .map(|_| {
            factor
                .iter()
                .map(|f| f + 0.3 * r.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0 / (m as f64).sqrt(); m]];
    for c in &cols {
        let mut v = c.clone();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let l = norm(&v);
        basis.push(v.into_iter().map(|x| x / l).collect());
    }
    let mut o: Vec<f64> = (0..m).map(|_| r.sample(StandardNormal)).collect();
    for b in &basis {
        let d: f64 = o.iter().zip(b).map(|(x, y)| x * y).sum();
        o.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
    }
    cols.push(o);
    let x = FeatureMatrix::from_columns(&cols).unwrap();
    let p = build_correlation_matrix(&x, SignMode::Absolute).unwrap();
    for i in 0..10 {
        assert!(p.get(i, 10) < 1e-10);
    }
    let ps = principal_score(p.matrix(), &SolverConfig::default()).unwrap();
    let mem = membership_scores(&x, &ps.eigen, SignMode::Absolute).unwrap();
    assert!(mem.scores[10] < 1e-8, "{}", mem.scores[10]);
    assert!(mem.scores[..10].iter().all(|&s| s > 0.7));
}

#[test]
fn planted_block_membership_separates() {
    let spec = PlantedSpec::window(200, 20, 200, 0.0, 0.85);
    let w = gen_planted_stream(&spec, 21).unwrap();
    let x = &w.value;
    let p = build_correlation_matrix(x, SignMode::Absolute).unwrap();
    let ps = principal_score(p.matrix(), &SolverConfig::default()).unwrap();
    let mem = membership_scores(x, &ps.eigen, SignMode::Absolute).unwrap();
    assert!(w.truth.iter().all(|&j| mem.scores[j] > 0.7));
    let noise: Vec<f64> = (0..x.n_cols())
        .filter(|j| !w.truth.contains(j))
        .map(|j| mem.scores[j])
        .collect();
    let quiet = noise.iter().filter(|&&s| s < 0.7).count();
    assert!(quiet as f64 >= 0.95 * noise.len() as f64);
}
