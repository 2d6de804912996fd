mod common;

use proptest::prelude::*;
use visage_core::verification::{
    exhaustive_counts_at, exhaustive_pairs, kfold_accuracy, rank_errors, roc_curve, tar_at_far, ScoreSet,
};

fn labeled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..60, any::<bool>()).prop_flat_map(|(n, ties)| {
        let score = if ties { (-8i32..=8).prop_map(|k| k as f64 / 8.0).boxed() } else { (-1.0f64..1.0).boxed() };
        (prop::collection::vec(score, n), prop::collection::vec(any::<bool>(), n))
            .prop_filter("both classes", |(_, g)| g.iter().any(|&x| x) && g.iter().any(|&x| !x))
    })
}

proptest! {
    #[test]
    fn roc_is_monotone_and_anchored((scores, genuine) in labeled_scores()) {
        let curve = roc_curve(&ScoreSet::from_parts(&scores, &genuine).unwrap()).unwrap();
        let first = curve.points.first().unwrap();
        let last = curve.points.last().unwrap();
        prop_assert_eq!((first.far, first.tar), (0.0, 0.0));
        prop_assert_eq!((last.far, last.tar), (1.0, 1.0));
        for w in curve.points.windows(2) {
            prop_assert!(w[1].far >= w[0].far && w[1].tar >= w[0].tar);
            prop_assert!(w[1].threshold < w[0].threshold);
        }
    }

    #[test]
    fn tar_at_far_matches_enumeration((scores, genuine) in labeled_scores(), target in 0.0f64..1.0) {
        let curve = roc_curve(&ScoreSet::from_parts(&scores, &genuine).unwrap()).unwrap();
        let want = common::tar_at_far(&scores, &genuine, target);
        prop_assert!((tar_at_far(&curve, target) - want).abs() < 1e-12);
        prop_assert_eq!(tar_at_far(&curve, 1.0), 1.0);
    }

    #[test]
    fn kfold_matches_enumeration((scores, genuine) in labeled_scores(), k in 2usize..6, seed in any::<u64>()) {
        use rand::SeedableRng;
        prop_assume!(scores.len() >= k);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let folds = common::random_folds(&mut rng, scores.len(), k);
        let got = kfold_accuracy(&ScoreSet::from_parts(&scores, &genuine).unwrap(), &folds).unwrap();
        for (f, (t, correct)) in common::kfold(&scores, &genuine, &folds).into_iter().enumerate() {
            prop_assert_eq!(got.thresholds[f], t);
            prop_assert!((got.accuracies[f] - correct as f64 / folds[f].len() as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_errors_partition_misclassified((scores, genuine) in labeled_scores(), threshold in -1.0f64..1.0) {
        let ranking = rank_errors(&ScoreSet::from_parts(&scores, &genuine).unwrap(), threshold).unwrap();
        let (fa, fr) = common::errors(&scores, &genuine, threshold);
        prop_assert_eq!(ranking.false_accepts.iter().map(|p| p.index).collect::<Vec<_>>(), fa);
        prop_assert_eq!(ranking.false_rejects.iter().map(|p| p.index).collect::<Vec<_>>(), fr);
    }

    #[test]
    fn streaming_counts_match_pairwise_scores(
        rows in prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 6), 2..30),
        threshold in -0.9f64..0.9,
    ) {
        prop_assume!(rows.iter().all(|r| r.iter().any(|&x| x.abs() > 1e-3)));
        let labels: Vec<usize> = (0..rows.len()).map(|i| i % 3).collect();
        let flat: Vec<f32> = rows.concat();
        let counts = exhaustive_counts_at(&flat, 6, &labels, &[threshold], 2).unwrap();
        let (set, _) = exhaustive_pairs(&rows, &labels).unwrap();
        // skip draws with a score too close to the threshold to settle at f32 precision
        prop_assume!(set.pairs.iter().all(|p| (p.score - threshold).abs() > 1e-5));
        let g = set.pairs.iter().filter(|p| p.genuine && p.score >= threshold).count() as u64;
        let i = set.pairs.iter().filter(|p| !p.genuine && p.score >= threshold).count() as u64;
        prop_assert_eq!(counts[0], (g, i));
    }
}
