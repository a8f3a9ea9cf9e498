mod common;

use common::*;
use growthmix::selection::{bic_diff_cached, full_comparison_bics, ClusterCache};
use growthmix::{bic_diff, not_clust_bic, run_search, select_k, FitConfig, KRange, SearchKind, SelectionConfig, TimepointSet};
use rand::Rng;
use rand_distr::StandardNormal;

fn config(k_max: usize) -> SelectionConfig {
    SelectionConfig {
        k_range: KRange::new(1, k_max).unwrap(),
        fit: FitConfig {
            n_restarts: 8,
            ..FitConfig::default()
        },
        seed: 17,
        ..SelectionConfig::default()
    }
}

/// Two clustered time points (indices 0 and 2) among `n` noise points.
fn two_signal_points(seed: u64, s: usize, n: usize) -> growthmix::LongitudinalDataset {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..s)
        .map(|i| {
            let g = (i % 2) as f64;
            (0..n)
                .map(|t| {
                    let e: f64 = r.sample(StandardNormal);
                    if t == 0 || t == 2 {
                        5.0 * g + e
                    } else {
                        e
                    }
                })
                .collect()
        })
        .collect();
    dataset(&rows, None)
}

#[test]
fn difference_equals_full_model_comparison() {
    for seed in 0..8u64 {
        let mut r = rng(300 + seed);
        let (ds, _) = clustered(&mut r, 40, 4, 2, 2.0);
        let cfg = config(3);
        let cache = ClusterCache::new();
        let current = TimepointSet::new(vec![0, 1, 3]).unwrap();
        for p in current.iter() {
            let (diff, _) = bic_diff_cached(p, &current, &ds, &cfg, &cache).unwrap();
            let (m1, m2) = full_comparison_bics(p, &current, &ds, &cfg, &cache).unwrap();
            assert!(close(diff, m1 - m2, 1e-9), "seed {seed} p {p}: {diff} vs {}", m1 - m2);

            // Both complete models assembled from scratch.
            let rest = current.without(p);
            let clust = |set: &TimepointSet| select_k(&ds, set, cfg.k_range, &cfg.fit, cfg.seed).unwrap().bic;
            let shared: f64 = (0..4)
                .filter(|&j| !current.contains(j))
                .map(|j| not_clust_bic(j, &current, &ds, false).unwrap().0)
                .sum();
            let full_m1 = clust(&current) + shared;
            let full_m2 = clust(&rest) + not_clust_bic(p, &rest, &ds, false).unwrap().0 + shared;
            assert!(close(diff, full_m1 - full_m2, 1e-9), "seed {seed} p {p}");
        }
    }
}

#[test]
fn a_duplicated_time_point_is_removed() {
    // Point 1 is point 0 plus tiny noise: the regression explains it almost exactly.
    let mut r = rng(21);
    let (base, _) = separated(&mut r, 60, 2, 2, 5.0);
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|s| {
            let y0 = base.outcome(s, 0);
            vec![y0, y0 + 1e-3 * r.sample::<f64, _>(StandardNormal), base.outcome(s, 1)]
        })
        .collect();
    let ds = dataset(&rows, None);
    let (diff, rec) = bic_diff(1, &ds.all_timepoints(), &ds, &config(3)).unwrap();
    assert!(diff > 0.0, "{diff}");
    assert!(rec.regression_predictors.contains(0));
}

#[test]
fn backward_search_keeps_the_clustered_points() {
    let ds = two_signal_points(1, 80, 5);
    let res = run_search(SearchKind::Backward, &ds, &config(3)).unwrap();
    assert_eq!(res.selected.indices(), &[0, 2]);
    assert_eq!(res.final_fit.as_ref().unwrap().k(), 2);
    assert!(!res.no_clustering_structure);
    assert_eq!(res.state.removed.len(), 3);
    // The last recorded step is the one that stopped the search.
    assert!(!res.state.trace.last().unwrap().removed);
}

#[test]
fn monotone_search_keeps_a_contiguous_block() {
    let ds = two_signal_points(2, 80, 5);
    let res = run_search(SearchKind::Monotone, &ds, &config(3)).unwrap();
    assert!(res.selected.is_contiguous());
    assert!(res.selected.contains(0) && res.selected.contains(2));
    for step in &res.state.trace {
        for rec in &step.proposals {
            assert!(rec.proposal == step.current.first().unwrap() || rec.proposal == step.current.last().unwrap());
        }
    }
}

#[test]
fn infinite_threshold_removes_nothing() {
    let ds = two_signal_points(3, 50, 4);
    let cfg = SelectionConfig {
        threshold: f64::INFINITY,
        ..config(2)
    };
    let res = run_search(SearchKind::Backward, &ds, &cfg).unwrap();
    assert_eq!(res.selected, ds.all_timepoints());
    assert!(res.state.removed.is_empty());
    assert_eq!(res.state.trace.len(), 1);
}

#[test]
fn single_time_point_degenerates_gracefully() {
    let mut r = rng(4);
    let ds = noise(&mut r, 50, 1);
    let res = run_search(SearchKind::Backward, &ds, &config(3)).unwrap();
    assert!(res.selected.is_empty() || res.selected.indices() == [0]);
    let (diff, rec) = bic_diff(0, &ds.all_timepoints(), &ds, &config(3)).unwrap();
    assert_eq!(rec.bic_clust_without, 0.0);
    assert_eq!(rec.k_without, None);
    assert!(diff.is_finite());
}

#[test]
fn two_time_points_run_to_completion() {
    let mut r = rng(6);
    let (ds, _) = separated(&mut r, 60, 2, 2, 5.0);
    let res = run_search(SearchKind::Backward, &ds, &config(3)).unwrap();
    assert!(!res.selected.is_empty());
    assert_eq!(res.full_fit.k(), 2);
}

#[test]
fn pure_noise_shows_no_clustering_structure() {
    let mut r = rng(8);
    let ds = noise(&mut r, 80, 4);
    let res = run_search(SearchKind::Backward, &ds, &config(3)).unwrap();
    assert!(res.no_clustering_structure);
    assert_eq!(res.full_fit.k(), 1);
}

#[test]
fn cache_does_not_change_the_result() {
    let ds = two_signal_points(5, 60, 4);
    let cfg = config(3);
    let a = run_search(SearchKind::Backward, &ds, &cfg).unwrap();
    let cache = ClusterCache::new();
    let b = growthmix::selection::run_search_cached(SearchKind::Backward, &ds, &cfg, &cache).unwrap();
    let c = growthmix::selection::run_search_cached(SearchKind::Backward, &ds, &cfg, &cache).unwrap();
    assert_eq!(a, b);
    assert_eq!(b, c);
    assert!(!cache.is_empty());
}

#[test]
fn nan_threshold_is_rejected() {
    let ds = two_signal_points(5, 30, 3);
    let cfg = SelectionConfig {
        threshold: f64::NAN,
        ..config(2)
    };
    assert!(run_search(SearchKind::Backward, &ds, &cfg).is_err());
}
