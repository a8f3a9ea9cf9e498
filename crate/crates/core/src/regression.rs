//! Gaussian linear regressions scored by BIC, used for the "does not
//! cluster" side of the measurement comparison: the proposal outcome is
//! explained by a BIC-selected subset of the current clustering outcomes
//! (and its own covariates, when they are in play).

use serde::{Deserialize, Serialize};

use crate::dataset::{LongitudinalDataset, TimepointSet};
use crate::error::{Error, Result};
use crate::lstsq::weighted_least_squares;
use crate::mixture::{bic_of, VARIANCE_FLOOR_FRACTION};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Maximum-likelihood fit of a linear model with intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    /// Intercept first, then one slope per design column.
    pub coefficients: Vec<f64>,
    /// RSS / S, floored relative to the response variance.
    pub sigma2: f64,
    pub rss: f64,
    pub loglik: f64,
}

impl OlsFit {
    /// Number of free parameters: coefficients plus the variance.
    pub fn n_params(&self) -> usize {
        self.coefficients.len() + 1
    }
}

/// Least squares of `response` on an intercept plus `design_columns`.
pub fn ols_fit(response: &[f64], design_columns: &[&[f64]]) -> Result<OlsFit> {
    let s = response.len();
    if design_columns.iter().any(|c| c.len() != s) {
        return Err(Error::LengthMismatch {
            left: s,
            right: design_columns.iter().map(|c| c.len()).find(|&l| l != s).unwrap_or(0),
        });
    }
    if s < design_columns.len() + 2 {
        return Err(Error::RankDeficientDesign);
    }
    let sol = weighted_least_squares(
        s,
        design_columns.len(),
        |i| response[i],
        |i, buf| {
            for (b, c) in buf.iter_mut().zip(design_columns) {
                *b = c[i];
            }
        },
        None,
    )?;
    let n = s as f64;
    let mean = response.iter().sum::<f64>() / n;
    let var = response.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let floor = (VARIANCE_FLOOR_FRACTION * var).max(1e-300);
    let sigma2 = (sol.weighted_rss / n).max(floor);
    let loglik = -0.5 * n * (LN_2PI + sigma2.ln()) - sol.weighted_rss / (2.0 * sigma2);
    Ok(OlsFit {
        coefficients: sol.coefficients,
        sigma2,
        rss: sol.weighted_rss,
        loglik,
    })
}

/// One accepted move of the stepwise search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepwiseMove {
    /// Time-point index added or dropped.
    pub index: usize,
    pub added: bool,
    pub bic: f64,
}

/// A selected regression of one time point's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub response_index: usize,
    /// Selected outcome predictors (time-point indices).
    pub predictor_indices: TimepointSet,
    /// Covariates of the response time point kept in the model.
    pub covariate_count: usize,
    /// Intercept, then predictor slopes in index order, then covariate slopes.
    pub coefficients: Vec<f64>,
    pub sigma2: f64,
    pub loglik: f64,
    pub bic: f64,
    pub n_params: usize,
    /// BIC of the starting (null) model followed by each accepted move.
    pub start_bic: f64,
    pub moves: Vec<StepwiseMove>,
    /// Candidates skipped because adding them made the design rank deficient.
    pub skipped: Vec<usize>,
}

struct Selection {
    selected: Vec<usize>,
    fit: OlsFit,
    bic: f64,
    start_bic: f64,
    moves: Vec<StepwiseMove>,
    skipped: Vec<usize>,
}

fn fit_subset(
    response: &[f64],
    candidates: &[(usize, Vec<f64>)],
    chosen: &[usize],
    forced: &[Vec<f64>],
) -> Result<(OlsFit, f64)> {
    let mut cols: Vec<&[f64]> = chosen
        .iter()
        .map(|&i| candidates.iter().find(|c| c.0 == i).expect("known candidate").1.as_slice())
        .collect();
    cols.extend(forced.iter().map(Vec::as_slice));
    let fit = ols_fit(response, &cols)?;
    let bic = bic_of(fit.loglik, fit.n_params(), response.len());
    Ok((fit, bic))
}

/// Forward-backward BIC search from the null model (intercept + `forced`).
/// Each round tries every single addition and deletion and applies the one
/// with the lowest BIC if it improves; equal BICs go to the lowest index.
fn stepwise_select(response: &[f64], candidates: &[(usize, Vec<f64>)], forced: &[Vec<f64>]) -> Result<Selection> {
    let mut selected: Vec<usize> = Vec::new();
    let (mut fit, mut bic) = fit_subset(response, candidates, &selected, forced)?;
    let start_bic = bic;
    let mut moves = Vec::new();
    let mut skipped = Vec::new();

    loop {
        let mut best: Option<(usize, bool, OlsFit, f64)> = None;
        for (idx, _) in candidates {
            let idx = *idx;
            let present = selected.contains(&idx);
            let trial: Vec<usize> = if present {
                selected.iter().copied().filter(|&i| i != idx).collect()
            } else {
                let mut t = selected.clone();
                t.push(idx);
                t.sort_unstable();
                t
            };
            match fit_subset(response, candidates, &trial, forced) {
                Ok((f, b)) => {
                    if best.as_ref().map_or(true, |(_, _, _, bb)| b < *bb) {
                        best = Some((idx, !present, f, b));
                    }
                }
                Err(Error::RankDeficientDesign) => {
                    if !skipped.contains(&idx) {
                        skipped.push(idx);
                    }
                }
                Err(e) => return Err(e),
            }
        }
        match best {
            Some((idx, added, f, b)) if b < bic => {
                if added {
                    selected.push(idx);
                    selected.sort_unstable();
                } else {
                    selected.retain(|&i| i != idx);
                }
                fit = f;
                bic = b;
                moves.push(StepwiseMove { index: idx, added, bic: b });
            }
            _ => break,
        }
    }
    skipped.sort_unstable();
    Ok(Selection {
        selected,
        fit,
        bic,
        start_bic,
        moves,
        skipped,
    })
}

/// Stepwise BIC regression of the outcome at `response_index` on the outcomes
/// at `candidates`, always keeping the `forced_covariates` columns.
pub fn stepwise_bic_regression(
    response_index: usize,
    candidates: &TimepointSet,
    dataset: &LongitudinalDataset,
    forced_covariates: &[Vec<f64>],
) -> Result<RegressionModel> {
    if candidates.contains(response_index) {
        return Err(Error::InvalidConfig("response cannot be its own candidate".into()));
    }
    let response = dataset.outcome_column(response_index);
    let cands: Vec<(usize, Vec<f64>)> = candidates.iter().map(|i| (i, dataset.outcome_column(i))).collect();
    let sel = stepwise_select(&response, &cands, forced_covariates)?;
    Ok(RegressionModel {
        response_index,
        predictor_indices: sel.selected.into_iter().collect(),
        covariate_count: forced_covariates.len(),
        n_params: sel.fit.n_params(),
        coefficients: sel.fit.coefficients,
        sigma2: sel.fit.sigma2,
        loglik: sel.fit.loglik,
        bic: sel.bic,
        start_bic: sel.start_bic,
        moves: sel.moves,
        skipped: sel.skipped,
    })
}

/// Covariate columns of one time point.
pub fn covariate_columns(dataset: &LongitudinalDataset, timepoint: usize) -> Vec<Vec<f64>> {
    (0..dataset.covariate_count(timepoint))
        .map(|j| dataset.covariate_column(timepoint, j))
        .collect()
}

/// Residuals of the outcome at `response_index` after OLS on its own covariates.
pub fn residualize_on_covariates(response_index: usize, dataset: &LongitudinalDataset) -> Result<Vec<f64>> {
    let p = dataset.covariate_count(response_index);
    if p == 0 {
        return Err(Error::InvalidConfig(format!(
            "time point {response_index} has no covariates to residualize on"
        )));
    }
    let y = dataset.outcome_column(response_index);
    let cols = covariate_columns(dataset, response_index);
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let fit = ols_fit(&y, &refs)?;
    Ok((0..y.len())
        .map(|s| {
            let fitted = fit.coefficients[0]
                + fit.coefficients[1..].iter().zip(&cols).map(|(b, c)| b * c[s]).sum::<f64>();
            y[s] - fitted
        })
        .collect())
}

/// BIC of the non-clustering model for `proposal` given the clustering set `current`.
///
/// Without covariates: stepwise regression of the proposal on `current`.
/// With covariates: the current outcomes are selected against the residuals
/// of the proposal on its covariates, then the proposal is regressed jointly
/// on its covariates and the selected outcomes; that joint model is scored.
pub fn not_clust_bic(
    proposal: usize,
    current: &TimepointSet,
    dataset: &LongitudinalDataset,
    use_covariates: bool,
) -> Result<(f64, RegressionModel)> {
    if current.contains(proposal) {
        return Err(Error::InvalidConfig(format!(
            "proposal {proposal} is already in the current set"
        )));
    }
    if !use_covariates || dataset.covariate_count(proposal) == 0 {
        let model = stepwise_bic_regression(proposal, current, dataset, &[])?;
        return Ok((model.bic, model));
    }

    let residuals = residualize_on_covariates(proposal, dataset)?;
    let cands: Vec<(usize, Vec<f64>)> = current.iter().map(|i| (i, dataset.outcome_column(i))).collect();
    let sel = stepwise_select(&residuals, &cands, &[])?;

    let covs = covariate_columns(dataset, proposal);
    let response = dataset.outcome_column(proposal);
    let (fit, bic) = fit_subset(&response, &cands, &sel.selected, &covs)?;
    let model = RegressionModel {
        response_index: proposal,
        predictor_indices: sel.selected.into_iter().collect(),
        covariate_count: covs.len(),
        n_params: fit.n_params(),
        coefficients: fit.coefficients,
        sigma2: fit.sigma2,
        loglik: fit.loglik,
        bic,
        start_bic: sel.start_bic,
        moves: sel.moves,
        skipped: sel.skipped,
    };
    Ok((bic, model))
}
