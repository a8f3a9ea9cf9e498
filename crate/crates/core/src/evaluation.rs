//! Agreement and accuracy metrics for comparing the selected-variable model
//! with the all-variable model.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{LongitudinalDataset, TimepointSet};
use crate::error::{Error, Result};
use crate::lstsq::weighted_least_squares;
use crate::mixture::FitResult;
use crate::selection::SelectionResult;

/// Hard cluster labels, one per subject.
pub type Partition = Vec<usize>;

/// Dense row-major matrix (subjects x time points).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_rows: usize,
    pub n_cols: usize,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            values: vec![0.0; n_rows * n_cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.n_cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.n_cols + c] = v;
    }

    /// Observed outcomes of a dataset as a grid.
    pub fn outcomes(dataset: &LongitudinalDataset) -> Self {
        let mut g = Self::zeros(dataset.n_subjects(), dataset.n_timepoints());
        for s in 0..g.n_rows {
            for n in 0..g.n_cols {
                g.set(s, n, dataset.outcome(s, n));
            }
        }
        g
    }
}

fn comb2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Hubert-Arabie adjusted Rand index. Returns 1 when both partitions are
/// trivial in the same way (the index is undefined there).
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
        *cells.entry((x, y)).or_default() += 1;
    }
    let index: f64 = cells.values().map(|&c| comb2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| comb2(c)).sum();
    let total = comb2(a.len());
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// How cluster-level predictions are combined per subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionMode {
    /// Posterior-weighted average of component regressions.
    #[default]
    Posterior,
    /// Regression of the MAP component only.
    Map,
}

/// Single-group OLS predictions of every subject at time point `n`.
pub fn one_group_predictions(dataset: &LongitudinalDataset, n: usize, use_covariates: bool) -> Result<Vec<f64>> {
    let p = if use_covariates { dataset.covariate_count(n) } else { 0 };
    let sol = weighted_least_squares(
        dataset.n_subjects(),
        p,
        |s| dataset.outcome(s, n),
        |s, buf| buf.copy_from_slice(&dataset.covariates(s, n)[..p]),
        None,
    )?;
    Ok((0..dataset.n_subjects())
        .map(|s| sol.predict(&dataset.covariates(s, n)[..p]))
        .collect())
}

/// Predicted outcomes over `all_timepoints` (columns in that order).
///
/// Time points in the fit's subset use the mixture; others use a one-group
/// regression when `one_group_fill` is set and are NaN otherwise.
pub fn fitted_values(
    fit: &FitResult,
    dataset: &LongitudinalDataset,
    all_timepoints: &TimepointSet,
    one_group_fill: bool,
    mode: PredictionMode,
) -> Result<Grid> {
    let model = &fit.model;
    let k = model.k();
    let mut out = Grid::zeros(dataset.n_subjects(), all_timepoints.len());
    for (col, n) in all_timepoints.iter().enumerate() {
        match model.subset.indices().binary_search(&n) {
            Ok(i) => {
                for s in 0..dataset.n_subjects() {
                    let x: &[f64] = if model.use_covariates { dataset.covariates(s, n) } else { &[] };
                    let v = match mode {
                        PredictionMode::Posterior => (0..k)
                            .map(|j| fit.posteriors.get(s, j) * model.params[i][j].mean(x))
                            .sum(),
                        PredictionMode::Map => model.params[i][fit.map_labels[s]].mean(x),
                    };
                    out.set(s, col, v);
                }
            }
            Err(_) if one_group_fill => {
                let pred = one_group_predictions(dataset, n, model.use_covariates)?;
                for (s, v) in pred.into_iter().enumerate() {
                    out.set(s, col, v);
                }
            }
            Err(_) => {
                for s in 0..dataset.n_subjects() {
                    out.set(s, col, f64::NAN);
                }
            }
        }
    }
    Ok(out)
}

/// Root mean squared difference over all cells.
pub fn rmse(predictions: &Grid, reference: &Grid) -> Result<f64> {
    if (predictions.n_rows, predictions.n_cols) != (reference.n_rows, reference.n_cols) {
        return Err(Error::ShapeMismatch {
            left: (predictions.n_rows, predictions.n_cols),
            right: (reference.n_rows, reference.n_cols),
        });
    }
    if predictions.values.is_empty() {
        return Ok(0.0);
    }
    let sse: f64 = predictions
        .values
        .iter()
        .zip(&reference.values)
        .map(|(p, r)| (p - r) * (p - r))
        .sum();
    Ok((sse / predictions.values.len() as f64).sqrt())
}

/// Known ground truth for a simulated dataset.
#[derive(Debug, Clone, Copy)]
pub struct Truth<'a> {
    pub labels: &'a [usize],
    pub means: &'a Grid,
}

/// Selected-variable vs all-variable comparison. Differences are
/// selected minus full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Components in the selected-variable model (`None` if nothing was selected).
    pub k_selected: Option<usize>,
    pub k_full: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ari_selected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ari_full: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ari_diff: Option<f64>,
    pub rmse_selected: f64,
    pub rmse_full: f64,
    pub rmse_diff: f64,
    /// `true_means` or `observed`.
    pub rmse_reference: String,
}

/// Predictions of the selected-variable model over every time point.
pub fn selected_predictions(
    selection: &SelectionResult,
    dataset: &LongitudinalDataset,
    mode: PredictionMode,
) -> Result<Grid> {
    let all = dataset.all_timepoints();
    match &selection.final_fit {
        Some(fit) => fitted_values(fit, dataset, &all, true, mode),
        None => {
            let use_cov = selection.full_fit.model.use_covariates;
            let mut g = Grid::zeros(dataset.n_subjects(), all.len());
            for n in all.iter() {
                for (s, v) in one_group_predictions(dataset, n, use_cov)?.into_iter().enumerate() {
                    g.set(s, n, v);
                }
            }
            Ok(g)
        }
    }
}

pub fn compare_models(
    selection: &SelectionResult,
    dataset: &LongitudinalDataset,
    truth: Option<Truth<'_>>,
) -> Result<ComparisonReport> {
    let all = dataset.all_timepoints();
    let mode = PredictionMode::Posterior;
    let sel_pred = selected_predictions(selection, dataset, mode)?;
    let full_pred = fitted_values(&selection.full_fit, dataset, &all, true, mode)?;
    let sel_labels: Vec<usize> = selection
        .final_fit
        .as_ref()
        .map_or_else(|| vec![0; dataset.n_subjects()], |f| f.map_labels.clone());

    let observed;
    let (reference, label) = match truth {
        Some(t) => (t.means, "true_means"),
        None => {
            observed = Grid::outcomes(dataset);
            (&observed, "observed")
        }
    };
    let rmse_selected = rmse(&sel_pred, reference)?;
    let rmse_full = rmse(&full_pred, reference)?;
    let (ari_selected, ari_full) = match truth {
        Some(t) => (
            Some(ari(&sel_labels, t.labels)?),
            Some(ari(&selection.full_fit.map_labels, t.labels)?),
        ),
        None => (None, None),
    };
    Ok(ComparisonReport {
        k_selected: selection.final_fit.as_ref().map(FitResult::k),
        k_full: selection.full_fit.k(),
        ari_diff: ari_selected.zip(ari_full).map(|(a, b)| a - b),
        ari_selected,
        ari_full,
        rmse_selected,
        rmse_full,
        rmse_diff: rmse_selected - rmse_full,
        rmse_reference: label.to_string(),
    })
}
