#![allow(dead_code)]

use growthmix::LongitudinalDataset;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    growthmix::seed::rng(seed)
}

/// Builds a dataset from per-subject outcome rows and optional per-time-point
/// covariate blocks.
pub fn dataset(rows: &[Vec<f64>], covariates: Option<(Vec<Vec<f64>>, Vec<usize>)>) -> LongitudinalDataset {
    let s = rows.len();
    let n = rows[0].len();
    let (cov, counts) = covariates.unwrap_or_else(|| (vec![vec![]; n], vec![0; n]));
    LongitudinalDataset::new(
        (0..s).map(|i| format!("id{i}")).collect(),
        (0..n).map(|t| t as f64).collect(),
        rows.iter().flatten().copied().collect(),
        cov,
        counts,
    )
    .unwrap()
}

/// Gaussian clusters with well spread centres, no covariates.
pub fn clustered(rng: &mut ChaCha8Rng, s: usize, n: usize, k: usize, spread: f64) -> (LongitudinalDataset, Vec<usize>) {
    let centres: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| spread * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let labels: Vec<usize> = (0..s).map(|i| i % k).collect();
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&g| centres[g].iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    (dataset(&rows, None), labels)
}

/// Clusters whose centres sit `gap` noise standard deviations apart on every
/// time point.
pub fn separated(rng: &mut ChaCha8Rng, s: usize, n: usize, k: usize, gap: f64) -> (LongitudinalDataset, Vec<usize>) {
    let labels: Vec<usize> = (0..s).map(|i| i % k).collect();
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&g| (0..n).map(|t| gap * g as f64 * if t % 2 == 0 { 1.0 } else { -1.0 } + rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    (dataset(&rows, None), labels)
}

/// Independent standard normal noise.
pub fn noise(rng: &mut ChaCha8Rng, s: usize, n: usize) -> LongitudinalDataset {
    let rows: Vec<Vec<f64>> = (0..s)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    dataset(&rows, None)
}

pub fn normal_logpdf(y: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (y - mean).powi(2) / (2.0 * var)
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
