use corrwatch::corrmat::{build_correlation_matrix, CorrelationMatrix, SignMode};
use corrwatch::gps::{
    fit_beta, gps_fit, group_stats, log_likelihood, project, update_labels, GpsConfig, GpsModel, MeanConstraint,
};
use corrwatch::ingest::FeatureMatrix;
use corrwatch::rng;
use corrwatch::synth::{gen_planted_matrix, PlantedSpec};
use proptest::prelude::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rand_distr::{Beta, Distribution, StandardNormal};

fn f1(found: &[usize], truth: &[usize]) -> f64 {
    let hit = found.iter().filter(|j| truth.contains(j)).count() as f64;
    if hit == 0.0 {
        return 0.0;
    }
    let (p, r) = (hit / found.len() as f64, hit / truth.len() as f64);
    2.0 * p * r / (p + r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_keeps_constraints_and_never_lowers_likelihood(
        n in 10usize..80,
        frac in 0.05f64..0.4,
        ell in 1usize..4,
        alpha in 0.55f64..0.95,
        seed in any::<u64>(),
    ) {
        let k = ((n as f64 * frac) as usize).max(2);
        let planted = gen_planted_matrix(&PlantedSpec::matrix(n, k, 0.2, 0.9), seed).unwrap();
        let mut r = rng::from_seed(seed);
        let init: Vec<Vec<usize>> = (0..ell).map(|_| (0..n).filter(|_| r.random_bool(0.2)).collect()).collect();
        let config = GpsConfig { ell, alpha, ..GpsConfig::default() };
        let fit = gps_fit(&planted.value, &config, Some(&init)).unwrap();
        prop_assert!(fit.model.constraints_hold(alpha), "{:?}", fit.model);
        prop_assert!(fit.model.loglik >= fit.initial_loglik - 1e-9 * fit.initial_loglik.abs().max(1.0));
        prop_assert!((log_likelihood(&planted.value, &fit.model, config.eps) - fit.model.loglik).abs()
            <= 1e-8 * fit.model.loglik.abs().max(1.0));
        for s in &fit.sets {
            prop_assert!(s.indices.len() >= 2);
            prop_assert!(s.indices.iter().all(|&j| fit.model.z[j] == s.group));
        }
    }

    #[test]
    fn pairs_are_partitioned_among_groups(n in 2usize..40, ell in 1usize..4, seed in any::<u64>()) {
        let p = gen_planted_matrix(&PlantedSpec::matrix(n, 0, 0.3, 0.3), seed).unwrap().value;
        let mut r = rng::from_seed(seed);
        let z: Vec<usize> = (0..n).map(|_| r.random_range(0..=ell)).collect();
        let stats = group_stats(&p, &z, ell, 1e-6);
        let total: f64 = stats.pairs.iter().sum();
        prop_assert_eq!(total, (n * (n - 1) / 2) as f64);
        for g in 0..ell {
            let c = z.iter().filter(|&&l| l == g).count();
            prop_assert_eq!(stats.pairs[g], (c * c.saturating_sub(1) / 2) as f64);
        }
    }

    #[test]
    fn projection_lands_in_the_feasible_set(a in 1e-3f64..1e3, b in 1e-3f64..1e3, bound in 0.51f64..0.99) {
        let (mut x, mut y) = (a, b);
        project(&mut x, &mut y, MeanConstraint::AtLeast(bound));
        prop_assert!(x / (x + y) >= bound - 1e-12 && x + y >= 1.0 - 1e-12);
        let (mut x, mut y) = (a, b);
        project(&mut x, &mut y, MeanConstraint::AtMost(0.5));
        prop_assert!(x / (x + y) <= 0.5 + 1e-12 && x + y >= 1.0 - 1e-12);
    }

    #[test]
    fn label_sweep_never_lowers_likelihood(n in 4usize..40, seed in any::<u64>()) {
        let p = gen_planted_matrix(&PlantedSpec::matrix(n, n / 4 + 1, 0.3, 0.85), seed).unwrap().value;
        let mut r = rng::from_seed(seed);
        let mut model = GpsModel {
            a: vec![r.random_range(2.0..20.0), r.random_range(1.0..5.0)],
            b: vec![r.random_range(0.5..3.0), r.random_range(2.0..10.0)],
            z: (0..n).map(|_| r.random_range(0..2)).collect(),
            loglik: 0.0,
        };
        let before = log_likelihood(&p, &model, 1e-6);
        update_labels(&p, &mut model, 1e-6);
        prop_assert!(log_likelihood(&p, &model, 1e-6) >= before - 1e-9 * before.abs().max(1.0));
    }
}

#[test]
fn beta_fit_recovers_several_shapes() {
    for (i, &(a, b)) in [(0.5, 0.5), (2.0, 5.0), (8.0, 2.0), (30.0, 4.0)].iter().enumerate() {
        let mut r = rng::from_seed(i as u64);
        let d = Beta::new(a, b).unwrap();
        let xs: Vec<f64> = (0..50_000).map(|_| d.sample(&mut r)).collect();
        let m = xs.len() as f64;
        let ml = xs.iter().map(|x| x.ln()).sum::<f64>() / m;
        let ml1 = xs.iter().map(|x| (1.0 - x).ln()).sum::<f64>() / m;
        let fit = fit_beta(ml, ml1, 1.0, 1.0, MeanConstraint::None, 1e-12, 10_000);
        assert!((fit.a / a - 1.0).abs() < 0.05, "a {} vs {a}", fit.a);
        assert!((fit.b / b - 1.0).abs() < 0.05, "b {} vs {b}", fit.b);
    }
}

#[test]
fn unstructured_matrix_gives_no_detections() {
    let n = 60;
    let mut r = rng::from_seed(4);
    let mut data = vec![1.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = r.random_range(0.0..0.05);
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    let noise = corrwatch::spectral::SymMatrix::new(n, data).unwrap();
    let p = CorrelationMatrix::new(noise, SignMode::Absolute, (0..n).map(|j| j.to_string()).collect()).unwrap();
    let fit = gps_fit(&p, &GpsConfig::default(), None).unwrap();
    assert!(fit.sets.is_empty());
    assert!(fit.model.z.iter().all(|&l| l == fit.model.background()));
}

#[test]
fn noisy_init_recovers_a_single_block() {
    for s in 0..10 {
        let planted = gen_planted_matrix(&PlantedSpec::matrix(300, 30, 0.2, 0.9), rng::derive(2, s)).unwrap();
        let mut r = rng::from_seed(s);
        let background: Vec<usize> = (0..300).filter(|j| !planted.truth.contains(j)).collect();
        let mut init: Vec<usize> = planted.truth[..24].to_vec();
        init.extend(background.choose_multiple(&mut r, 6));
        let config = GpsConfig {
            ell: 1,
            ..GpsConfig::default()
        };
        let fit = gps_fit(&planted.value, &config, Some(&[init])).unwrap();
        let set = &fit.sets[0];
        assert!(f1(&set.indices, &planted.truth) >= 0.9, "seed {s}");
        assert!(set.score > 0.7);
    }
}

/// Two factor blocks plus independent noise columns.
fn two_blocks(seed: u64) -> (FeatureMatrix, Vec<usize>, Vec<usize>) {
    let mut r = rng::from_seed(seed);
    let rows = 120;
    let mut order: Vec<usize> = (0..150).collect();
    order.shuffle(&mut r);
    let (a, b) = (order[..20].to_vec(), order[20..35].to_vec());
    let fa: Vec<f64> = (0..rows).map(|_| r.sample(StandardNormal)).collect();
    let fb: Vec<f64> = (0..rows).map(|_| r.sample(StandardNormal)).collect();
    let cols: Vec<Vec<f64>> = (0..150)
        .map(|j| {
            let f = if a.contains(&j) {
                Some(&fa)
            } else if b.contains(&j) {
                Some(&fb)
            } else {
                None
            };
            (0..rows)
                .map(|i| {
                    let e: f64 = r.sample(StandardNormal);
                    f.map_or(e, |f| 0.95 * f[i] + 0.3 * e)
                })
                .collect()
        })
        .collect();
    let (mut a, mut b) = (a, b);
    a.sort_unstable();
    b.sort_unstable();
    (FeatureMatrix::from_columns(&cols).unwrap(), a, b)
}

#[test]
fn two_blocks_are_separated() {
    for s in 0..5 {
        let (x, a, b) = two_blocks(s);
        let p = build_correlation_matrix(&x, SignMode::Absolute).unwrap();
        let init = vec![a[..16].to_vec(), b[..12].to_vec()];
        let fit = gps_fit(&p, &GpsConfig::default(), Some(&init)).unwrap();
        assert_eq!(fit.sets.len(), 2, "seed {s}");
        // Match sets to blocks either way round.
        let (s0, s1) = (&fit.sets[0].indices, &fit.sets[1].indices);
        let straight = f1(s0, &a).min(f1(s1, &b));
        let crossed = f1(s0, &b).min(f1(s1, &a));
        assert!(straight.max(crossed) >= 0.9, "seed {s}: {straight} / {crossed}");
    }
}
