mod common;

use common::*;
use kgalign::align::*;
use kgalign::graph::{EntityId, SeedAlignment, SeedKind};
use kgalign::{Error, TopKSimilarityMatrix};
use rand::seq::SliceRandom;

fn random_truth(n: usize, seed: u64) -> SeedAlignment {
    let mut targets: Vec<EntityId> = (0..n as EntityId).collect();
    targets.shuffle(&mut rng(seed));
    SeedAlignment::new((0..n as EntityId).zip(targets).collect(), SeedKind::GroundTruth).unwrap()
}

#[test]
fn augmentation_matches_dense_mutual_argmax() {
    for seed in 0..5 {
        let m = random_sparse(100, 100, 8, 8, seed);
        let got = augment_seeds(&m, &SeedAlignment::empty(SeedKind::TrainSeed));
        let want = dense_mutual_argmax(&to_dense(&m), 100);
        assert_eq!(got.pairs(), &want[..], "seed {seed}");
        assert_eq!(got.kind(), SeedKind::PseudoSeed);
    }
}

#[test]
fn augmentation_skips_existing_seed_entities() {
    let m = random_sparse(50, 50, 5, 5, 3);
    let all = augment_seeds(&m, &SeedAlignment::empty(SeedKind::TrainSeed));
    assert!(all.len() >= 2);
    let existing = SeedAlignment::new(all.pairs()[..1].to_vec(), SeedKind::TrainSeed).unwrap();
    let rest = augment_seeds(&m, &existing);
    assert_eq!(rest.pairs(), &all.pairs()[1..]);
}

#[test]
fn fusion_matches_dense_addition() {
    for seed in 0..5 {
        let a = random_sparse(60, 80, 10, 10, seed);
        let b = random_sparse(60, 80, 6, 6, seed + 100);
        let fused = fuse_channels(&a, &b).unwrap();
        let want = dense_sum_topk(&to_dense(&a), 1.0, &to_dense(&b), 1.0, 10);
        assert_eq!(rows_match(&fused, &want, 1e-12), 0, "seed {seed}");
    }
}

#[test]
fn inference_is_row_argmax() {
    let m = random_sparse(40, 30, 4, 4, 7);
    let dense = to_dense(&m);
    let mapping = infer_alignment(&m);
    assert_eq!(mapping.len(), 40);
    for &(s, t, v) in &mapping.matches {
        let best = dense[s as usize].iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(v, best);
        assert_eq!(dense[s as usize][t as usize], Some(v));
        // lowest id among tied maxima
        let first = dense[s as usize].iter().position(|x| *x == Some(best)).unwrap();
        assert_eq!(t as usize, first);
    }
}

#[test]
fn inference_leaves_empty_rows_unmatched() {
    let m = TopKSimilarityMatrix::from_rows(3, 3, 2, vec![vec![(1, 0.5)], vec![], vec![(0, 0.1)]]).unwrap();
    let a = infer_alignment(&m);
    assert_eq!(a.matches, vec![(0, 1, 0.5), (2, 0, 0.1)]);
}

#[test]
fn metrics_match_full_sort_ranks() {
    for seed in 0..5 {
        let m = random_sparse(100, 100, 20, 20, seed);
        let truth = random_truth(100, seed);
        let report = evaluate(&m, &truth, &[1, 5, 10]).unwrap();
        let dense = to_dense(&m);
        let ranks: Vec<Option<usize>> =
            truth.iter().map(|(s, t)| full_sort_rank(&dense[s as usize], t as usize)).collect();
        for n in [1, 5, 10] {
            let want = ranks.iter().filter(|r| r.is_some_and(|r| r <= n)).count() as f64 / 100.0;
            assert!((report.hits(n).unwrap() - want).abs() < 1e-12);
        }
        let mrr = ranks.iter().map(|r| r.map_or(0.0, |r| 1.0 / r as f64)).sum::<f64>() / 100.0;
        assert!((report.mrr - mrr).abs() < 1e-12);
        assert_eq!(report.evaluated_pairs, 100);
    }
}

#[test]
fn metrics_invariant_under_positive_scaling() {
    let m = random_sparse(50, 50, 10, 10, 11);
    let truth = random_truth(50, 11);
    let a = evaluate(&m, &truth, &[1, 10]).unwrap();
    let b = evaluate(&m.scaled(3.7), &truth, &[1, 10]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn empty_truth_is_an_error() {
    let m = random_sparse(5, 5, 2, 2, 0);
    assert!(matches!(evaluate(&m, &SeedAlignment::empty(SeedKind::GroundTruth), &[1]), Err(Error::NoPairs)));
}

#[test]
fn precision_counts_true_pseudo_pairs() {
    let truth = SeedAlignment::new(vec![(0, 0), (1, 1), (2, 2)], SeedKind::GroundTruth).unwrap();
    let pseudo = SeedAlignment::new(vec![(0, 0), (1, 2), (3, 3)], SeedKind::PseudoSeed).unwrap();
    assert!((augmentation_precision(&pseudo, &truth).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!(matches!(
        augmentation_precision(&SeedAlignment::empty(SeedKind::PseudoSeed), &truth),
        Err(Error::NoPseudoSeeds)
    ));
}
