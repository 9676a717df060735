use std::collections::{BTreeMap, BTreeSet};

use deeptrack::assoc::CostWeights;
use deeptrack::gesture::{classify, Gesture, Trajectory};
use deeptrack::kalman::MotionModel;
use deeptrack::metrics::evaluate;
use deeptrack::simkit::{crossing_spec, generate, ScenarioKind, ScenarioSpec};
use deeptrack::tracker::{FrameResult, Tracker, TrackerConfig};
use proptest::prelude::*;

fn config(lambda: f64) -> TrackerConfig {
    TrackerConfig {
        weights: CostWeights {
            lambda,
            ..CostWeights::default()
        },
        ..TrackerConfig::default()
    }
}

fn run(cfg: TrackerConfig, spec: &ScenarioSpec) -> Vec<FrameResult> {
    let sc = generate(spec).unwrap();
    Tracker::new(cfg, MotionModel::default()).run(&sc.detections)
}

/// Ids unique per frame, boxes finite, and no id returning after its track
/// was deleted (a gap longer than max_age).
fn check_output(results: &[FrameResult], max_age: u32) {
    let mut last_seen: BTreeMap<u64, usize> = BTreeMap::new();
    for (f, r) in results.iter().enumerate() {
        let ids: BTreeSet<u64> = r.tracks.iter().map(|t| t.id).collect();
        assert_eq!(ids.len(), r.tracks.len(), "duplicate id in frame {f}");
        for t in &r.tracks {
            let b = t.bbox;
            assert!([b.x(), b.y(), b.w(), b.h()].iter().all(|v| v.is_finite()));
            if let Some(prev) = last_seen.insert(t.id, f) {
                assert!(f - prev <= max_age as usize + 1, "id {} came back", t.id);
            }
        }
    }
}

#[test]
fn noise_free_crossing_keeps_identities() {
    for seed in 0..20 {
        let spec = ScenarioSpec {
            noise_std: 0.0,
            embedding_noise_std: 0.0,
            ..crossing_spec(seed)
        };
        let sc = generate(&spec).unwrap();
        let results =
            Tracker::new(TrackerConfig::default(), MotionModel::default()).run(&sc.detections);
        let r = evaluate(&results, &sc.ground_truth, 0.5).unwrap();
        assert_eq!(r.id_switches, 0, "seed {seed}");
        let ids: BTreeSet<u64> = results
            .iter()
            .flat_map(|f| f.tracks.iter().map(|t| t.id))
            .collect();
        assert_eq!(ids.len(), 2, "seed {seed}");
    }
}

#[test]
fn appearance_never_worse_on_crossings() {
    let mut totals = [0u64; 2];
    for seed in 0..30 {
        let sc = generate(&crossing_spec(seed)).unwrap();
        for (k, lambda) in [1.0, 0.5].into_iter().enumerate() {
            let results = Tracker::new(config(lambda), MotionModel::default()).run(&sc.detections);
            check_output(&results, 30);
            totals[k] += evaluate(&results, &sc.ground_truth, 0.5)
                .unwrap()
                .id_switches;
        }
    }
    assert!(totals[1] <= totals[0], "{totals:?}");
}

#[test]
fn gestures_survive_the_tracker() {
    for (kind, label) in [
        (ScenarioKind::Swipe, Gesture::Swipe),
        (ScenarioKind::Zoom, Gesture::Zoom),
        (ScenarioKind::Click, Gesture::Click),
    ] {
        for seed in 0..10 {
            let spec = ScenarioSpec {
                noise_std: 1.0,
                ..ScenarioSpec::new(kind, seed)
            };
            let results = run(TrackerConfig::default(), &spec);
            let mut samples = Vec::new();
            for r in &results {
                for t in &r.tracks {
                    samples.push((r.frame, t.bbox));
                }
            }
            let t = Trajectory::new(samples).unwrap();
            assert_eq!(classify(&t).label, label, "{kind} seed {seed}");
        }
    }
}

#[test]
fn clutter_alone_confirms_nothing() {
    let spec = ScenarioSpec {
        n_targets: 1,
        clutter_rate: 5.0,
        duration: 200,
        ..ScenarioSpec::new(ScenarioKind::Fixation, 8)
    };
    let sc = generate(&spec).unwrap();
    let clutter_only: Vec<Vec<_>> = sc
        .detections
        .iter()
        .zip(&sc.origins)
        .map(|(d, o)| {
            d.iter()
                .zip(o)
                .filter(|(_, o)| matches!(o, deeptrack::simkit::DetectionOrigin::Clutter(_)))
                .map(|(d, _)| d.clone())
                .collect()
        })
        .collect();
    let results = Tracker::new(TrackerConfig::default(), MotionModel::default()).run(&clutter_only);
    assert!(results.iter().all(|r| r.tracks.is_empty()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn invariants_hold_on_random_scenarios(
        seed in 0u64..1000,
        kind in prop::sample::select(vec![
            ScenarioKind::Swipe,
            ScenarioKind::Click,
            ScenarioKind::Zoom,
            ScenarioKind::Fixation,
            ScenarioKind::Occlusion,
            ScenarioKind::Mixed,
        ]),
        noise in 0.0..4.0f64,
        p_miss in 0.0..0.3f64,
        clutter in 0.0..5.0f64,
        lambda in prop::sample::select(vec![0.5, 1.0]),
    ) {
        let spec = ScenarioSpec {
            n_targets: if kind == ScenarioKind::Occlusion { 4 } else { 3 },
            noise_std: noise,
            p_miss,
            clutter_rate: clutter,
            embedding_noise_std: 0.1,
            ..ScenarioSpec::new(kind, seed)
        };
        let first = run(config(lambda), &spec);
        check_output(&first, 30);
        // Same stream and configuration, same output.
        prop_assert_eq!(&first, &run(config(lambda), &spec));
    }
}
