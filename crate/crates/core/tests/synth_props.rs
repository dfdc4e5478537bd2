use corrwatch::corrmat::{build_correlation_matrix, SignMode};
use corrwatch::rng;
use corrwatch::synth::{
    concentration, degeneration_curve, gen_core_fringe, gen_planted_matrix, gen_planted_stream, inject_anomalies,
    measured_strength, predicted_rho, GrowthRule, PlantedSpec, Scenario,
};
use proptest::prelude::*;

fn mean_entry(p: &corrwatch::corrmat::CorrelationMatrix, pick: impl Fn(usize, usize) -> bool) -> f64 {
    let (mut s, mut c) = (0.0, 0usize);
    for i in 0..p.n() {
        for j in i + 1..p.n() {
            if pick(i, j) {
                s += p.get(i, j);
                c += 1;
            }
        }
    }
    s / c as f64
}

#[test]
fn injections_stay_in_their_declared_ranges() {
    let base = gen_planted_stream(&PlantedSpec::window(400, 0, 40, 0.1, 0.1), 1)
        .unwrap()
        .value;
    for s in 0..50 {
        let seed = rng::derive(31, s);
        let n = base.n_cols() as f64;

        let big = inject_anomalies(&base, Scenario::BigSets, seed, 1.4).unwrap();
        let f = big.truth.len() as f64 / (n + big.truth.len() as f64);
        assert!((0.2 - 1e-3..=0.5 + 1e-3).contains(&f), "big sets fraction {f}");

        let strong = inject_anomalies(&base, Scenario::StrongStrength, seed, 1.4).unwrap();
        let f = strong.truth.len() as f64 / (n + strong.truth.len() as f64);
        assert!((0.05 - 1e-3..=0.2 + 1e-3).contains(&f), "strong fraction {f}");
        assert!(
            (0.3 - 1e-9..=0.6 + 1e-9).contains(&strong.strength),
            "strength {}",
            strong.strength
        );

        let hidden = inject_anomalies(&base, Scenario::Hidden, seed, 1.4).unwrap();
        assert!((20..=200).contains(&hidden.truth.len()));
        assert!(hidden.strength < 0.1);

        for inj in [&big, &strong, &hidden] {
            assert!((0.8..=0.95).contains(&inj.correlation));
            assert_eq!(inj.original(), base);
            assert_eq!(inj.truth, (base.n_cols()..inj.window.n_cols()).collect::<Vec<_>>());
            assert!((measured_strength(&inj.window, &inj.truth, 1.4) - inj.strength).abs() < 1e-12);
        }
    }
}

#[test]
fn injected_columns_correlate_as_declared() {
    let base = gen_planted_stream(&PlantedSpec::window(100, 0, 400, 0.0, 0.0), 2)
        .unwrap()
        .value;
    let inj = inject_anomalies(&base, Scenario::StrongStrength, 3, 1.4).unwrap();
    let p = build_correlation_matrix(&inj.window, SignMode::Absolute).unwrap();
    let t = &inj.truth;
    let within = mean_entry(&p, |i, j| t.contains(&i) && t.contains(&j));
    assert!(
        (within - inj.correlation).abs() < 0.05,
        "{within} vs {}",
        inj.correlation
    );
}

#[test]
fn planted_stream_hits_target_correlations() {
    let spec = PlantedSpec::window(120, 30, 2000, 0.3, 0.85);
    let w = gen_planted_stream(&spec, 6).unwrap();
    let p = build_correlation_matrix(&w.value, SignMode::Absolute).unwrap();
    let t = &w.truth;
    let within = mean_entry(&p, |i, j| t.contains(&i) && t.contains(&j));
    let outside = mean_entry(&p, |i, j| !(t.contains(&i) && t.contains(&j)));
    assert!((within - 0.85).abs() < 0.03, "{within}");
    assert!((outside - 0.3).abs() < 0.03, "{outside}");
}

#[test]
fn planted_matrix_entry_means() {
    let p = gen_planted_matrix(&PlantedSpec::matrix(600, 150, 0.3, 0.85), 8).unwrap();
    let k = 150;
    assert!((mean_entry(&p.value, |i, j| i < k && j < k) - 0.85).abs() < 0.01);
    assert!((mean_entry(&p.value, |_, j| j >= k) - 0.3).abs() < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generators_are_deterministic(seed in any::<u64>(), n in 5usize..40, k in 2usize..5) {
        let spec = PlantedSpec::matrix(n, k, 0.2, 0.8);
        prop_assert_eq!(gen_planted_matrix(&spec, seed).unwrap(), gen_planted_matrix(&spec, seed).unwrap());
        let spec = PlantedSpec::window(n, k, 10, 0.2, 0.8).with_strength(0.4);
        let a = gen_planted_stream(&spec, seed).unwrap();
        prop_assert_eq!(&a, &gen_planted_stream(&spec, seed).unwrap());
        prop_assert!((measured_strength(&a.value, &a.truth, 1.4) - 0.4).abs() < 1e-9);
        let c = gen_core_fringe(n + 10, k, 2, 10, 0.5, 0.9, 0.3, 0.5, seed).unwrap();
        prop_assert_eq!(&c, &gen_core_fringe(n + 10, k, 2, 10, 0.5, 0.9, 0.3, 0.5, seed).unwrap());
    }
}

#[test]
fn core_fringe_layout() {
    let c = gen_core_fringe(200, 25, 5, 100, 0.6, 0.9, 0.3, 0.8, 4).unwrap();
    assert_eq!((c.core.len(), c.fringe.len()), (25, 5));
    assert!(c.core.iter().all(|j| !c.fringe.contains(j)));
    let mut both = c.core.clone();
    both.extend(&c.fringe);
    assert!((measured_strength(&c.window, &both, 1.4) - 0.8).abs() < 1e-9);
    assert!(gen_core_fringe(30, 25, 5, 100, 0.6, 0.9, 0.3, 0.8, 4).is_err());
    assert!(gen_core_fringe(200, 25, 5, 100, 0.6, 0.3, 0.9, 0.8, 4).is_err());
}

#[test]
fn background_only_score_falls_toward_the_mean() {
    let rows = degeneration_curve(GrowthRule::Fixed(0), &[500, 2000, 8000], 0.5, 0.85, 3, 17).unwrap();
    let gaps: Vec<f64> = rows.iter().map(|r| r.rho - 0.5).collect();
    assert!(gaps.iter().all(|&g| g > 0.0));
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn concentration_rows_carry_the_prediction() {
    let rows = concentration(&[0.5], 500, 0.3, 0.85, 4, 3).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r.k, 250);
        assert_eq!(r.predicted_rho, predicted_rho(0.3, 0.85, 0.5));
        assert!(r.within_band, "{}", r.rho);
    }
}
