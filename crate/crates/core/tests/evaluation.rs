use std::collections::BTreeSet;

use active_search::classifier::{ConstantScorer, OracleScorer};
use active_search::dataio::synthetic::{generate_synthetic, SyntheticConfig, SyntheticDataset};
use active_search::dataio::GroundTruth;
use active_search::eval::{
    average_precision, budget_curve, exhaustive_episode, nms, random_mean_curve, regular_checkpoints,
    subsampling_baseline, tune_hyperparameters, Detection, FoldForest, Policy, SearchSetup, TuneConfig, TuneGrid,
    MATCH_IOU, NMS_THRESHOLD,
};
use active_search::export::{read_snapshot, read_traces, write_snapshot, write_traces};
use active_search::forest::{train_forest, ForestConfig, ForestModel};
use active_search::geometry::{iou, Window};
use active_search::search::{run_episode_with, EpisodeOptions, Hyperparameters};
use rand::{Rng, SeedableRng};

fn det(image: &str, x: f64, y: f64, w: f64, h: f64, score: f64) -> Detection {
    Detection {
        image_id: image.into(),
        window: Window::new(x, y, w, h).unwrap(),
        score,
    }
}

fn small_benchmark() -> (SyntheticDataset, ForestModel) {
    let cfg = SyntheticConfig {
        train_scenes: 60,
        test_scenes: 40,
        proposals_per_image: 200,
        code_bits: 128,
        seed: 21,
        ..SyntheticConfig::default()
    };
    let data = generate_synthetic(&cfg).unwrap();
    let forest = train_forest(&data.train, "object", &ForestConfig::default(), 4).unwrap();
    (data, forest)
}

#[test]
fn nms_three_boxes_by_hand() {
    // IoU(A,B) = 0.12/0.20 = 0.6, IoU(A,C) = 0.04/0.28, IoU(B,C) = 0.08/0.24.
    // Greedy: keep A, drop B (0.6 > 0.3), keep C (only compared with A).
    let a = det("i", 0.0, 0.0, 0.4, 0.4, 0.9);
    let b = det("i", 0.1, 0.0, 0.4, 0.4, 0.8);
    let c = det("i", 0.3, 0.0, 0.4, 0.4, 0.7);
    assert!((iou(&a.window, &b.window) - 0.6).abs() < 1e-12);
    assert!((iou(&b.window, &c.window) - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(
        nms(&[b.clone(), c.clone(), a.clone()], NMS_THRESHOLD),
        vec![a.clone(), c.clone()]
    );
    // without A, B suppresses C
    assert_eq!(nms(&[c, b.clone()], NMS_THRESHOLD), vec![b]);
    assert!(nms(&[], NMS_THRESHOLD).is_empty());
}

#[test]
fn nms_output_invariants_on_random_detections() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let dets: Vec<Detection> = (0..rng.random_range(1..40))
            .map(|_| {
                let w = rng.random_range(0.05..0.5);
                let h = rng.random_range(0.05..0.5);
                det(
                    "i",
                    rng.random_range(0.0..1.0 - w),
                    rng.random_range(0.0..1.0 - h),
                    w,
                    h,
                    (rng.random_range(0..10) as f64) / 10.0,
                )
            })
            .collect();
        let kept = nms(&dets, NMS_THRESHOLD);
        assert!(!kept.is_empty());
        for k in &kept {
            assert!(dets.contains(k));
        }
        for (i, a) in kept.iter().enumerate() {
            for b in &kept[i + 1..] {
                assert!(a.score >= b.score);
                assert!(iou(&a.window, &b.window) <= NMS_THRESHOLD);
            }
        }
    }
}

#[test]
fn ap_three_detections_two_boxes_by_hand() {
    let gt: GroundTruth = [(
        "i".to_string(),
        vec![
            Window::new(0.0, 0.0, 0.2, 0.2).unwrap(),
            Window::new(0.6, 0.6, 0.2, 0.2).unwrap(),
        ],
    )]
    .into_iter()
    .collect();
    // ranks: TP, FP, TP -> precision 1, 1/2, 2/3 at recall 1/2, 1/2, 1
    let dets = [
        det("i", 0.0, 0.0, 0.2, 0.2, 0.9),
        det("i", 0.3, 0.3, 0.2, 0.2, 0.8),
        det("i", 0.61, 0.6, 0.2, 0.2, 0.7),
    ];
    let ap = average_precision(&dets, &gt, MATCH_IOU).unwrap();
    assert!((ap - 5.0 / 6.0).abs() < 1e-15, "{ap}");

    assert_eq!(average_precision(&dets[..1], &gt, MATCH_IOU), Some(0.5));
    assert_eq!(average_precision(&dets[1..2], &gt, MATCH_IOU), Some(0.0));
    assert_eq!(average_precision(&[], &gt, MATCH_IOU), Some(0.0));
    let empty: GroundTruth = [("i".to_string(), vec![])].into_iter().collect();
    assert_eq!(average_precision(&dets, &empty, MATCH_IOU), None);
}

#[test]
fn ap_is_a_rank_statistic() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let mut gt = GroundTruth::new();
    let mut dets = Vec::new();
    for img in 0..20 {
        let id = format!("img-{img}");
        let boxes: Vec<Window> = (0..2)
            .map(|k| Window::new(0.1 + 0.5 * k as f64, 0.3, 0.3, 0.3).unwrap())
            .collect();
        for _ in 0..15 {
            let b = boxes[rng.random_range(0..2)];
            let x = (b.x() + rng.random_range(-0.2..0.2)).clamp(0.0, 0.7);
            dets.push(det(&id, x, 0.3, 0.3, 0.3, rng.random_range(0.0..1.0)));
        }
        gt.insert(id, boxes);
    }
    let base = average_precision(&dets, &gt, MATCH_IOU).unwrap();
    assert!(base > 0.0 && base < 1.0);
    for f in [|s: f64| s * s, |s: f64| s.sqrt(), |s: f64| 0.2 + 0.3 * s] {
        let moved: Vec<Detection> = dets
            .iter()
            .map(|d| Detection {
                score: f(d.score),
                ..d.clone()
            })
            .collect();
        assert_eq!(
            average_precision(&moved, &gt, MATCH_IOU).unwrap().to_bits(),
            base.to_bits()
        );
    }
}

#[test]
fn curve_ends_at_exhaustive_ap_and_starts_at_zero() {
    let (data, forest) = small_benchmark();
    let scorer = OracleScorer::new("object", 0.05, 3).unwrap();
    let setup = SearchSetup {
        forest: Some(&forest),
        scorer: &scorer,
        start: forest.start_window().unwrap(),
    };
    let checkpoints = regular_checkpoints(20, 200);
    let theta = Hyperparameters::new(0.5, 0.1, 0.1, 200).unwrap();
    let active = budget_curve(&data.test, "object", &setup, &Policy::Active(theta), &checkpoints).unwrap();
    let exhaustive = budget_curve(&data.test, "object", &setup, &Policy::Exhaustive, &[200]).unwrap();
    assert_eq!(active.points[0], (0, 0.0));
    assert_eq!(
        active.points.last().unwrap().1.to_bits(),
        exhaustive.points[0].1.to_bits()
    );
    let random = budget_curve(&data.test, "object", &setup, &Policy::Random { seed: 4 }, &checkpoints).unwrap();
    assert_eq!(
        random.points.last().unwrap().1.to_bits(),
        exhaustive.points[0].1.to_bits()
    );
}

#[test]
fn random_baseline_is_a_seeded_permutation_prefix() {
    let (data, _) = small_benchmark();
    let scorer = OracleScorer::new("object", 0.0, 0).unwrap();
    let img = &data.test.images()[0];
    let a = subsampling_baseline(img, &scorer, 50, 7).unwrap();
    let b = subsampling_baseline(img, &scorer, 50, 7).unwrap();
    assert_eq!(a.trace, b.trace);
    let c = subsampling_baseline(img, &scorer, 50, 8).unwrap();
    assert_ne!(a.trace, c.trace);
    let visited: BTreeSet<usize> = a.trace.iter().map(|s| s.proposal_index).collect();
    assert_eq!(visited.len(), 50);

    let n = img.proposals.len();
    let mut full = subsampling_baseline(img, &scorer, n, 123).unwrap().detections();
    let mut all = exhaustive_episode(img, &scorer).unwrap().detections();
    full.sort_by(|x, y| x.window.to_array().partial_cmp(&y.window.to_array()).unwrap());
    all.sort_by(|x, y| x.window.to_array().partial_cmp(&y.window.to_array()).unwrap());
    assert_eq!(full, all);
    assert!(subsampling_baseline(img, &scorer, 0, 1).is_err());
}

#[test]
fn active_beats_random_mean_at_a_tenth_of_the_proposals() {
    let (data, forest) = small_benchmark();
    let scorer = OracleScorer::new("object", 0.0, 0).unwrap();
    let setup = SearchSetup {
        forest: Some(&forest),
        scorer: &scorer,
        start: forest.start_window().unwrap(),
    };
    let tenth = 20;
    let theta = Hyperparameters::new(0.5, 0.1, 0.1, tenth).unwrap();
    let active = budget_curve(&data.test, "object", &setup, &Policy::Active(theta), &[tenth]).unwrap();
    let random = random_mean_curve(&data.test, "object", &scorer, &[tenth], 20, 5).unwrap();
    assert!(
        random.points[0].1 < active.points[0].1,
        "random {:?} active {:?}",
        random.points,
        active.points
    );
}

#[test]
fn tune_single_point_and_degenerate_scorer() {
    let (data, forest) = small_benchmark();
    let scorer = OracleScorer::new("object", 0.0, 0).unwrap();
    let cfg = TuneConfig {
        grid: TuneGrid::single(0.25, 0.1, 0.316),
        folds: 2,
        checkpoints: regular_checkpoints(10, 50),
        seed: 1,
    };
    let r = tune_hyperparameters(&data.train, "object", FoldForest::Shared(&forest), &scorer, &cfg).unwrap();
    assert_eq!((r.best.lambda, r.best.sigma_s, r.best.sigma_c), (0.25, 0.1, 0.316));
    assert_eq!(r.scores.len(), 1);
    assert_eq!(r.scores[0].fold_aucs.len(), 2);

    // a constant 0.5 score makes the score force vanish; λ=1 leaves every
    // belief at zero, and the tie-break prefers λ=0 anyway
    let constant = ConstantScorer::new(0.5).unwrap();
    let cfg = TuneConfig {
        grid: TuneGrid {
            lambdas: vec![0.0, 1.0],
            sigma_s: vec![0.1],
            sigma_c: vec![0.1],
        },
        ..cfg
    };
    let r = tune_hyperparameters(&data.train, "object", FoldForest::Shared(&forest), &constant, &cfg).unwrap();
    assert_eq!(r.best.lambda, 0.0);

    let empty = TuneConfig {
        grid: TuneGrid {
            lambdas: vec![],
            sigma_s: vec![0.1],
            sigma_c: vec![0.1],
        },
        ..cfg
    };
    assert!(tune_hyperparameters(&data.train, "object", FoldForest::Shared(&forest), &constant, &empty).is_err());
}

#[test]
fn traces_and_snapshots_round_trip() {
    let (data, forest) = small_benchmark();
    let scorer = OracleScorer::new("object", 0.05, 1).unwrap();
    let theta = Hyperparameters::new(0.5, 0.1, 0.1, 30).unwrap();
    let options = EpisodeOptions {
        snapshots: vec![1, 30],
        memo: None,
    };
    let episodes: Vec<_> = data.test.images()[..3]
        .iter()
        .map(|img| run_episode_with(img, &forest, &scorer, &theta, &forest.start_window().unwrap(), &options).unwrap())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("traces.tsv");
    write_traces(&p, &episodes).unwrap();
    let back = read_traces(&p).unwrap();
    assert_eq!(back.len(), 3);
    for ((id, steps), e) in back.iter().zip(&episodes) {
        assert_eq!(id, &e.image_id);
        assert_eq!(steps, &e.trace);
    }
    let snap = &episodes[0].snapshots[1];
    assert_eq!(snap.t, 30);
    let s = dir.path().join("snap.tsv");
    write_snapshot(&s, snap).unwrap();
    assert_eq!(read_snapshot(&s).unwrap(), snap.beliefs);
}
