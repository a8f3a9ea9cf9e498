mod common;

use common::*;
use growthmix::{bic_of, not_clust_bic, ols_fit, stepwise_bic_regression, TimepointSet};
use rand::Rng;
use rand_distr::StandardNormal;

/// Lowest BIC over every subset of the candidate outcomes.
fn exhaustive_best(ds: &growthmix::LongitudinalDataset, response: usize, candidates: &[usize]) -> (f64, Vec<usize>) {
    let y = ds.outcome_column(response);
    let cols: Vec<Vec<f64>> = candidates.iter().map(|&c| ds.outcome_column(c)).collect();
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 0u32..(1 << candidates.len()) {
        let chosen: Vec<usize> = (0..candidates.len()).filter(|b| mask & (1 << b) != 0).collect();
        let refs: Vec<&[f64]> = chosen.iter().map(|&b| cols[b].as_slice()).collect();
        if let Ok(fit) = ols_fit(&y, &refs) {
            let bic = bic_of(fit.loglik, fit.n_params(), y.len());
            if bic < best.0 {
                best = (bic, chosen.iter().map(|&b| candidates[b]).collect());
            }
        }
    }
    best
}

/// Response at index 0 built from a random linear mix of candidates 1..=m.
fn instance(seed: u64, dominant: bool) -> (growthmix::LongitudinalDataset, Vec<usize>) {
    let mut r = rng(seed);
    let s = r.gen_range(30..80);
    let m = r.gen_range(1..=5);
    let lead = r.gen_range(1..=m);
    let rows: Vec<Vec<f64>> = (0..s)
        .map(|_| {
            let x: Vec<f64> = (0..m).map(|_| r.sample(StandardNormal)).collect();
            let e: f64 = r.sample(StandardNormal);
            let y = if dominant {
                5.0 * x[lead - 1] + 0.1 * e
            } else {
                x.iter().map(|v| v * r.gen_range(-0.6..0.6)).sum::<f64>() + e
            };
            std::iter::once(y).chain(x).collect()
        })
        .collect();
    (dataset(&rows, None), (1..=m).collect())
}

#[test]
fn stepwise_never_beats_exhaustive_search() {
    for seed in 0..60 {
        let (ds, cands) = instance(seed, false);
        let model = stepwise_bic_regression(0, &cands.iter().copied().collect(), &ds, &[]).unwrap();
        let (best, _) = exhaustive_best(&ds, 0, &cands);
        assert!(model.bic >= best - 1e-9 * best.abs(), "seed {seed}: {} < {best}", model.bic);
    }
}

#[test]
fn stepwise_finds_the_optimum_with_one_dominant_predictor() {
    for seed in 100..140 {
        let (ds, cands) = instance(seed, true);
        let model = stepwise_bic_regression(0, &cands.iter().copied().collect(), &ds, &[]).unwrap();
        let (best, subset) = exhaustive_best(&ds, 0, &cands);
        assert!(close(model.bic, best, 1e-12), "seed {seed}: {} vs {best}", model.bic);
        assert_eq!(model.predictor_indices.indices(), subset.as_slice());
    }
}

#[test]
fn stepwise_trace_is_strictly_decreasing() {
    for seed in 0..20 {
        let (ds, cands) = instance(seed, false);
        let model = stepwise_bic_regression(0, &cands.iter().copied().collect(), &ds, &[]).unwrap();
        let mut prev = model.start_bic;
        for mv in &model.moves {
            assert!(mv.bic < prev);
            prev = mv.bic;
        }
        assert_eq!(prev, model.bic);
    }
}

#[test]
fn null_model_when_no_predictors_remain() {
    let mut r = rng(5);
    let ds = noise(&mut r, 40, 2);
    let (bic, model) = not_clust_bic(1, &TimepointSet::empty(), &ds, false).unwrap();
    assert!(model.predictor_indices.is_empty());
    let y = ds.outcome_column(1);
    let fit = ols_fit(&y, &[]).unwrap();
    assert_eq!(bic, bic_of(fit.loglik, 2, 40));
}

#[test]
fn covariates_are_kept_in_the_non_clustering_model() {
    // y1 = 2 x1 + y0 + noise: both the covariate and the earlier outcome matter.
    let mut r = rng(9);
    let s = 120;
    let mut rows = Vec::new();
    let mut cov = vec![Vec::new(), Vec::new()];
    for _ in 0..s {
        let x0: f64 = r.sample(StandardNormal);
        let x1: f64 = r.sample(StandardNormal);
        let y0: f64 = x0 + r.sample::<f64, _>(StandardNormal);
        let y1 = 2.0 * x1 + y0 + 0.2 * r.sample::<f64, _>(StandardNormal);
        cov[0].push(x0);
        cov[1].push(x1);
        rows.push(vec![y0, y1]);
    }
    let ds = dataset(&rows, Some((cov, vec![1, 1])));
    let (_, model) = not_clust_bic(1, &TimepointSet::new(vec![0]).unwrap(), &ds, true).unwrap();
    assert_eq!(model.predictor_indices.indices(), &[0]);
    assert_eq!(model.covariate_count, 1);
    // Intercept, y0 slope, covariate slope.
    assert_eq!(model.coefficients.len(), 3);
    assert!((model.coefficients[1] - 1.0).abs() < 0.1);
    assert!((model.coefficients[2] - 2.0).abs() < 0.1);
}
