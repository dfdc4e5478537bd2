use std::collections::BTreeSet;

use corrwatch::ingest::FeatureMatrix;
use corrwatch::pipeline::{gate_alert, run_stream, run_window, Algorithms, PipelineConfig};
use corrwatch::rng;
use corrwatch::rps::Algorithm;
use corrwatch::synth::{gen_planted_stream, PlantedSpec};

fn planted(seed: u64) -> (FeatureMatrix, BTreeSet<String>) {
    let spec = PlantedSpec::window(200, 20, 100, 0.1, 0.9).with_strength(0.97);
    let w = gen_planted_stream(&spec, seed).unwrap();
    let ids = w.truth.iter().map(|&j| w.value.col_ids()[j].clone()).collect();
    (w.value, ids)
}

fn set(v: &[String]) -> BTreeSet<String> {
    v.iter().cloned().collect()
}

#[test]
fn noise_windows_raise_no_alerts() {
    let config = PipelineConfig::default();
    for s in 0..20 {
        let x = gen_planted_stream(&PlantedSpec::window(20, 0, 100, 0.0, 0.0), rng::derive(1, s))
            .unwrap()
            .value
            .with_window(s as usize, 0, 0);
        assert!(run_window(&x, &config).unwrap().alerts.is_empty(), "window {s}");
    }
}

#[test]
fn strong_block_is_confirmed_as_core() {
    let config = PipelineConfig::default();
    for s in 0..5 {
        let (x, truth) = planted(rng::derive(2, s));
        let r = run_window(&x, &config).unwrap();
        assert_eq!(r.alerts.len(), 1);
        let a = &r.alerts[0];
        assert!(
            a.algorithm.contains("rps") && a.algorithm.contains("gps"),
            "{}",
            a.algorithm
        );
        let gps: BTreeSet<String> = r
            .detections
            .iter()
            .zip(&r.verdicts)
            .filter(|(d, v)| d.algorithm == Algorithm::Gps && v.is_ok())
            .flat_map(|(d, _)| d.anomalies.iter().cloned())
            .collect();
        assert_eq!(set(&a.core), gps);
        let core = set(&a.core);
        let hit = core.intersection(&truth).count();
        assert!(
            hit >= 18 && hit as f64 >= 0.9 * core.len() as f64,
            "seed {s}: {hit} of {}",
            core.len()
        );
    }
}

#[test]
fn without_the_generative_detector_everything_is_suspicious() {
    let config = PipelineConfig {
        algorithms: Algorithms {
            gps: false,
            ..Algorithms::default()
        },
        ..PipelineConfig::default()
    };
    let (x, _) = planted(7);
    let r = run_window(&x, &config).unwrap();
    assert!(!r.alerts.is_empty());
    for a in &r.alerts {
        assert!(a.core.is_empty());
        assert_eq!(set(&a.suspicious), set(&a.anomalies));
    }
}

#[test]
fn stream_alerts_are_gated_ordered_and_accounted() {
    let windows: Vec<FeatureMatrix> = (0..12)
        .map(|w| {
            let x = if w % 3 == 0 {
                planted(rng::derive(3, w)).0
            } else {
                gen_planted_stream(&PlantedSpec::window(60, 0, 80, 0.2, 0.2), rng::derive(4, w))
                    .unwrap()
                    .value
            };
            x.with_window(w as usize, w as i64 * 10, w as i64 * 10 + 10)
        })
        .collect();
    for per_algorithm in [false, true] {
        let config = PipelineConfig {
            per_algorithm,
            ..PipelineConfig::default()
        };
        let mut seen = Vec::new();
        let mut checked = 0;
        let summary = run_stream(windows.clone(), &config, 5, |r| {
            seen.push(r.window_id);
            for (d, v) in r.detections.iter().zip(&r.verdicts) {
                assert_eq!(*v, gate_alert(d, &config));
            }
            for a in &r.alerts {
                assert!(a.score > config.threshold && a.strength >= config.strength_floor);
                let mut parts = set(&a.core);
                parts.extend(a.suspicious.iter().cloned());
                assert_eq!(parts, set(&a.anomalies));
                assert!(set(&a.core).is_disjoint(&set(&a.suspicious)));
                checked += 1;
            }
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, (0..12).collect::<Vec<_>>());
        assert_eq!(summary.windows, 12);
        assert_eq!(summary.alerts, checked);
        assert!(checked >= 4);
        let passed: usize = summary.detections_passed.values().sum();
        let suppressed: usize = summary.suppressed.values().sum();
        assert!(passed + suppressed >= 12 * 2);
        assert!(summary.mean_runtime(Algorithm::Rps).is_some());
    }
}

#[test]
fn lowering_the_threshold_never_removes_alerts() {
    let strict = PipelineConfig::default();
    let loose = PipelineConfig {
        threshold: 0.6,
        ..PipelineConfig::default()
    };
    for s in 0..10 {
        let x = gen_planted_stream(&PlantedSpec::window(40, 4, 60, 0.2, 0.7), rng::derive(5, s))
            .unwrap()
            .value;
        let a = run_window(&x, &strict).unwrap().alerts.len();
        let b = run_window(&x, &loose).unwrap().alerts.len();
        assert!(b >= a);
    }
}
