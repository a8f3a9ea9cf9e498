//! k-means starting partitions for EM.
//!
//! Plain Lloyd iterations from `n_restarts` random starts (k distinct
//! subjects as initial centroids), keeping the start with the smallest
//! within-cluster sum of squares. Features are the raw outcome values on the
//! time points being modelled.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::dataset::{LongitudinalDataset, TimepointSet};
use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_RESTARTS: usize = 50;
pub const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitAssignment {
    pub labels: Vec<usize>,
    /// Within-cluster sum of squares of `labels` about their cluster means.
    pub wcss: f64,
}

impl InitAssignment {
    pub fn k(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }
}

/// Outcome matrix restricted to `subset`, row-major S x |subset|.
fn feature_matrix(dataset: &LongitudinalDataset, subset: &TimepointSet) -> Vec<f64> {
    let mut out = Vec::with_capacity(dataset.n_subjects() * subset.len());
    for s in 0..dataset.n_subjects() {
        out.extend(subset.iter().map(|n| dataset.outcome(s, n)));
    }
    out
}

/// Best-of-restarts k-means on the outcomes at `subset`.
pub fn kmeans_init(
    dataset: &LongitudinalDataset,
    subset: &TimepointSet,
    k: usize,
    n_restarts: usize,
    seed: u64,
) -> Result<InitAssignment> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let points = feature_matrix(dataset, subset);
    kmeans(&points, subset.len(), k, n_restarts, seed)
}

/// Best-of-restarts k-means on row-major `points` with `dim` columns.
/// Ties in wcss go to the lowest restart index.
pub fn kmeans(points: &[f64], dim: usize, k: usize, n_restarts: usize, seed: u64) -> Result<InitAssignment> {
    let mut best: Option<InitAssignment> = None;
    // With one cluster every start ends in the same partition.
    let restarts = if k == 1 { 1 } else { n_restarts.max(1) };
    for r in 0..restarts {
        let run = kmeans_single(points, dim, k, seed::child_seed(seed, &[r as u64]))?;
        if best.as_ref().map_or(true, |b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// One restart: random distinct-subject centroids, then Lloyd iterations.
pub fn kmeans_single(points: &[f64], dim: usize, k: usize, seed: u64) -> Result<InitAssignment> {
    if dim == 0 {
        return Err(Error::EmptySubset);
    }
    let n = points.len() / dim;
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::TooFewSubjects { k, n_subjects: n });
    }
    let mut rng = seed::rng(seed);
    let starts = sample(&mut rng, n, k).into_vec();
    let (labels, wcss) = lloyd(points, dim, k, &starts, MAX_LLOYD_ITERATIONS);
    Ok(InitAssignment { labels, wcss })
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    // Independent accumulators let the adds pipeline.
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| (x - y) * (x - y)).sum();
    for (x, y) in ca.zip(cb) {
        let x: &[f64; 4] = x.try_into().expect("chunk of 4");
        let y: &[f64; 4] = y.try_into().expect("chunk of 4");
        for l in 0..4 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// At most `max_iter` Lloyd iterations from the given starting centroids
/// (row indices). Returns the labels and their wcss.
///
/// Triangle-inequality bounds (Elkan's scheme) skip distance evaluations
/// that cannot change a label, and cluster sums are updated only for points
/// that move.
pub(crate) fn lloyd(points: &[f64], dim: usize, k: usize, starts: &[usize], max_iter: usize) -> (Vec<usize>, f64) {
    let n = points.len() / dim;
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centroids: Vec<f64> = starts.iter().flat_map(|&i| row(i).iter().copied()).collect();
    let mut previous = centroids.clone();
    let mut labels = vec![usize::MAX; n];
    // Upper bound on the distance to the own centroid; lower bound on the
    // distance to each centroid (row-major n x k).
    let mut upper = vec![f64::INFINITY; n];
    let mut lower = vec![0.0; n * k];
    let mut gaps = vec![0.0; k * k];
    let mut half_gap = vec![0.0; k];
    let mut counts = vec![0usize; k];
    let mut sums = vec![0.0; k * dim];

    for iter in 0..max_iter {
        for c in 0..k {
            for o in 0..c {
                let g = sq_dist(&centroids[c * dim..(c + 1) * dim], &centroids[o * dim..(o + 1) * dim]).sqrt();
                gaps[c * k + o] = g;
                gaps[o * k + c] = g;
            }
        }
        for c in 0..k {
            half_gap[c] = 0.5 * (0..k).filter(|&o| o != c).map(|o| gaps[c * k + o]).fold(f64::INFINITY, f64::min);
        }
        let mut changed = false;
        for i in 0..n {
            let p = row(i);
            let own = labels[i];
            let bounds = &mut lower[i * k..(i + 1) * k];
            let mut best = own;
            if own == usize::MAX {
                let mut best_d = f64::INFINITY;
                for (c, lb) in bounds.iter_mut().enumerate() {
                    let d = sq_dist(p, &centroids[c * dim..(c + 1) * dim]).sqrt();
                    *lb = d;
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                upper[i] = best_d;
            } else {
                if upper[i] <= half_gap[own] {
                    continue;
                }
                let mut tight = false;
                for c in 0..k {
                    if c == best || upper[i] <= bounds[c] || upper[i] <= 0.5 * gaps[best * k + c] {
                        continue;
                    }
                    if !tight {
                        upper[i] = sq_dist(p, &centroids[best * dim..(best + 1) * dim]).sqrt();
                        bounds[best] = upper[i];
                        tight = true;
                        if upper[i] <= bounds[c] || upper[i] <= 0.5 * gaps[best * k + c] {
                            continue;
                        }
                    }
                    let d = sq_dist(p, &centroids[c * dim..(c + 1) * dim]).sqrt();
                    bounds[c] = d;
                    if d < upper[i] || (d == upper[i] && c < best) {
                        best = c;
                        upper[i] = d;
                    }
                }
            }
            if best != own {
                if own != usize::MAX {
                    counts[own] -= 1;
                    sums[own * dim..(own + 1) * dim].iter_mut().zip(p).for_each(|(a, v)| *a -= v);
                }
                counts[best] += 1;
                sums[best * dim..(best + 1) * dim].iter_mut().zip(p).for_each(|(a, v)| *a += v);
                labels[i] = best;
                changed = true;
            }
        }

        // Empty cluster: hand it the point farthest from its own centroid.
        if counts.contains(&0) {
            let mut dist: Vec<f64> = (0..n)
                .map(|i| sq_dist(row(i), &centroids[labels[i] * dim..(labels[i] + 1) * dim]))
                .collect();
            while let Some(empty) = counts.iter().position(|&c| c == 0) {
                let mut far = usize::MAX;
                let mut far_d = -1.0;
                for i in 0..n {
                    if counts[labels[i]] > 1 && dist[i] > far_d {
                        far_d = dist[i];
                        far = i;
                    }
                }
                let from = labels[far];
                counts[from] -= 1;
                sums[from * dim..(from + 1) * dim].iter_mut().zip(row(far)).for_each(|(a, v)| *a -= v);
                labels[far] = empty;
                counts[empty] += 1;
                sums[empty * dim..(empty + 1) * dim].iter_mut().zip(row(far)).for_each(|(a, v)| *a += v);
                dist[far] = 0.0;
                centroids[empty * dim..(empty + 1) * dim].copy_from_slice(row(far));
                changed = true;
            }
            // Bounds no longer refer to the current centroids.
            upper.iter_mut().for_each(|u| *u = f64::INFINITY);
            lower.iter_mut().for_each(|l| *l = 0.0);
        }

        if !changed && iter > 0 {
            break;
        }

        previous.copy_from_slice(&centroids);
        for c in 0..k {
            let inv = 1.0 / counts[c] as f64;
            for (m, a) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                *m = a * inv;
            }
        }
        let moved: Vec<f64> = (0..k)
            .map(|c| sq_dist(&previous[c * dim..(c + 1) * dim], &centroids[c * dim..(c + 1) * dim]).sqrt())
            .collect();
        for i in 0..n {
            upper[i] += moved[labels[i]];
            for (lb, m) in lower[i * k..(i + 1) * k].iter_mut().zip(&moved) {
                *lb = (*lb - m).max(0.0);
            }
        }
    }
    let wcss = wcss_of(points, dim, &labels);
    (labels, wcss)
}

/// Within-cluster sum of squares of an arbitrary labelling.
pub fn wcss_of(points: &[f64], dim: usize, labels: &[usize]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for d in 0..dim {
            sums[c * dim + d] += points[i * dim + d];
        }
    }
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            (0..dim)
                .map(|d| {
                    let m = sums[c * dim + d] / counts[c] as f64;
                    (points[i * dim + d] - m).powi(2)
                })
                .sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_cluster_gives_total_sum_of_squares() {
        let pts = [1.0, 2.0, 4.0, 9.0];
        let a = kmeans(&pts, 1, 1, 5, 3).unwrap();
        assert_eq!(a.labels, vec![0; 4]);
        let mean = 4.0;
        let tss: f64 = pts.iter().map(|v| (v - mean) * (v - mean)).sum();
        assert!((a.wcss - tss).abs() < 1e-12);
    }

    #[test]
    fn separated_clouds_split() {
        let mut pts = Vec::new();
        for i in 0..10 {
            let e = i as f64 * 0.1;
            pts.extend([e, -e]);
            pts.extend([100.0 + e, 100.0 - e]);
        }
        let a = kmeans(&pts, 2, 2, 10, 1).unwrap();
        for i in 0..10 {
            assert_eq!(a.labels[2 * i], a.labels[0]);
            assert_eq!(a.labels[2 * i + 1], a.labels[1]);
        }
        assert_ne!(a.labels[0], a.labels[1]);
    }

    #[test]
    fn four_points_match_exhaustive_partition() {
        let pts = [0.0, 1.0, 10.0, 11.0];
        // Brute force over all labelings of 4 points into 2 non-empty groups.
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1u32..15 {
            let labels: Vec<usize> = (0..4).map(|i| ((mask >> i) & 1) as usize).collect();
            let w = wcss_of(&pts, 1, &labels);
            if w < best.0 {
                best = (w, labels);
            }
        }
        let a = kmeans(&pts, 1, 2, 50, 11).unwrap();
        assert!((a.wcss - best.0).abs() < 1e-12);
        assert_eq!(a.labels[0], a.labels[1]);
        assert_eq!(a.labels[2], a.labels[3]);
        assert_ne!(a.labels[0], a.labels[2]);
        assert!((best.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_subjects_and_empty_subset() {
        assert!(matches!(kmeans(&[1.0, 2.0], 1, 3, 1, 0), Err(Error::TooFewSubjects { .. })));
        let d = LongitudinalDataset::new(
            vec!["a".into()],
            vec![1.0],
            vec![0.0],
            vec![vec![]],
            vec![0],
        )
        .unwrap();
        assert!(matches!(
            kmeans_init(&d, &TimepointSet::empty(), 1, 1, 0),
            Err(Error::EmptySubset)
        ));
    }

    #[test]
    fn identical_points_still_fill_every_cluster() {
        let pts = [2.0; 6];
        let a = kmeans(&pts, 1, 3, 4, 9).unwrap();
        for c in 0..3 {
            assert!(a.labels.contains(&c));
        }
        assert_eq!(a.wcss, 0.0);
    }

    /// Textbook Lloyd without bounds; same empty-cluster rule.
    fn naive_lloyd(points: &[f64], dim: usize, k: usize, starts: &[usize]) -> Vec<usize> {
        let n = points.len() / dim;
        let row = |i: usize| &points[i * dim..(i + 1) * dim];
        let mut centroids: Vec<f64> = starts.iter().flat_map(|&i| row(i).to_vec()).collect();
        let mut labels = vec![usize::MAX; n];
        for _ in 0..MAX_LLOYD_ITERATIONS {
            let mut changed = false;
            for i in 0..n {
                let mut best = 0;
                for c in 1..k {
                    if sq_dist(row(i), &centroids[c * dim..(c + 1) * dim])
                        < sq_dist(row(i), &centroids[best * dim..(best + 1) * dim])
                    {
                        best = c;
                    }
                }
                changed |= labels[i] != best;
                labels[i] = best;
            }
            if !changed {
                break;
            }
            let mut counts = vec![0.0; k];
            centroids.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..n {
                counts[labels[i]] += 1.0;
                for d in 0..dim {
                    centroids[labels[i] * dim + d] += row(i)[d];
                }
            }
            for c in 0..k {
                for d in 0..dim {
                    centroids[c * dim + d] /= counts[c];
                }
            }
        }
        labels
    }

    proptest! {
        #[test]
        fn bounded_lloyd_matches_naive_lloyd(
            raw in proptest::collection::vec(-20.0f64..20.0, 60..240),
            k in 2usize..6,
            seed in any::<u64>(),
        ) {
            let dim = 3;
            let n = raw.len() / dim;
            let pts = &raw[..n * dim];
            let mut rng = seed::rng(seed);
            let starts = sample(&mut rng, n, k).into_vec();
            let naive = naive_lloyd(pts, dim, k, &starts);
            // Only comparable when the naive run never produced an empty cluster.
            prop_assume!((0..k).all(|c| naive.contains(&c)));
            let (labels, wcss) = lloyd(pts, dim, k, &starts, MAX_LLOYD_ITERATIONS);
            prop_assert_eq!(&labels, &naive);
            prop_assert!((wcss - wcss_of(pts, dim, &naive)).abs() <= 1e-9 * (1.0 + wcss));
        }

        #[test]
        fn lloyd_never_increases_wcss(
            raw in proptest::collection::vec(-50.0f64..50.0, 8..60),
            k in 1usize..5,
            seed in any::<u64>(),
        ) {
            let dim = 2;
            let n = raw.len() / dim;
            prop_assume!(n >= k);
            let pts = &raw[..n * dim];
            let mut rng = seed::rng(seed);
            let starts = sample(&mut rng, n, k).into_vec();
            let trace: Vec<f64> = (1..12).map(|t| lloyd(pts, dim, k, &starts, t).1).collect();
            for w in trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()));
            }
            let (labels, _) = lloyd(pts, dim, k, &starts, MAX_LLOYD_ITERATIONS);
            for c in 0..k {
                prop_assert!(labels.contains(&c));
            }
        }

        #[test]
        fn best_of_restarts_beats_each_restart(
            raw in proptest::collection::vec(-10.0f64..10.0, 10..40),
            k in 1usize..4,
            seed in any::<u64>(),
        ) {
            let n = raw.len();
            prop_assume!(n >= k);
            let best = kmeans(&raw, 1, k, 6, seed).unwrap();
            for r in 0..6u64 {
                let single = kmeans_single(&raw, 1, k, seed::child_seed(seed, &[r])).unwrap();
                prop_assert!(best.wcss <= single.wcss);
            }
            prop_assert_eq!(best, kmeans(&raw, 1, k, 6, seed).unwrap());
        }
    }
}
