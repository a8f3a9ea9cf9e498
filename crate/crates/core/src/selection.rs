//! Backward measurement selection driven by BIC differences.
//!
//! For a proposal time point p in the current clustering set C, the
//! clustering model on C is compared with the clustering model on C \ {p}
//! plus a regression of y_p on C \ {p}:
//!
//! ```text
//! diff(p) = BIC(clust(C)) - [BIC(clust(C \ {p})) + BIC(not_clust(p | C \ {p}))]
//! ```
//!
//! Positive values favour dropping p. Each clustering BIC is minimized over
//! the k range. Clustering fits are memoized per time-point subset; the
//! k-means seed of a fit is derived from the subset itself, so the cache and
//! any evaluation order give identical results.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{LongitudinalDataset, TimepointSet};
use crate::error::{Error, Result};
use crate::mixture::{select_k_scored, FitConfig, FitResult, KRange, KScore};
use crate::regression::not_clust_bic;

/// Proposals whose BIC differences are this close (relative) are tied.
pub const DIFF_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchKind {
    /// Every member of the current set is a proposal each round.
    #[default]
    Backward,
    /// Only the earliest and latest members are proposals.
    Monotone,
}

impl std::str::FromStr for SearchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "backward" | "greedy" => Ok(Self::Backward),
            "monotone" => Ok(Self::Monotone),
            other => Err(Error::InvalidConfig(format!("unknown search `{other}`"))),
        }
    }
}

impl std::fmt::Display for SearchKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Backward => "backward",
            Self::Monotone => "monotone",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub k_range: KRange,
    /// A proposal is removed only when its BIC difference exceeds this.
    pub threshold: f64,
    pub fit: FitConfig,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            k_range: KRange::default(),
            threshold: 0.0,
            fit: FitConfig::default(),
            seed: 0,
        }
    }
}

/// Audit record of one proposal's comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub proposal: usize,
    /// BIC of the clustering model with the proposal included.
    pub bic_clust_with: f64,
    pub k_with: usize,
    /// BIC of the clustering model without the proposal; 0 when nothing remains.
    pub bic_clust_without: f64,
    pub k_without: Option<usize>,
    pub bic_not_clust: f64,
    /// Outcomes the proposal was regressed on in the non-clustering model.
    pub regression_predictors: TimepointSet,
    pub bic_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStep {
    pub step: usize,
    pub current: TimepointSet,
    pub proposals: Vec<ProposalRecord>,
    /// Proposal with the largest BIC difference.
    pub chosen: usize,
    pub removed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub index: usize,
    pub bic_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionState {
    pub current: TimepointSet,
    pub removed: Vec<Removal>,
    pub trace: Vec<SearchStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub search: SearchKind,
    pub selected: TimepointSet,
    /// Best fit on the selected time points; `None` when nothing survived.
    pub final_fit: Option<FitResult>,
    pub final_scores: Vec<KScore>,
    pub full_fit: FitResult,
    pub full_scores: Vec<KScore>,
    pub state: SelectionState,
    /// Selection emptied, or the selected-variable model prefers one component.
    pub no_clustering_structure: bool,
}

/// Memoized best-over-k clustering fits keyed by time-point subset.
#[derive(Default)]
pub struct ClusterCache {
    fits: Mutex<HashMap<TimepointSet, Option<Arc<(FitResult, Vec<KScore>)>>>>,
}

impl ClusterCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.fits.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Best fit over `config.k_range` on `subset`.
    pub fn get(
        &self,
        dataset: &LongitudinalDataset,
        subset: &TimepointSet,
        config: &SelectionConfig,
    ) -> Result<Arc<(FitResult, Vec<KScore>)>> {
        if let Some(entry) = self.fits.lock().expect("cache lock").get(subset) {
            return entry.clone().ok_or(Error::AllFitsFailed {
                min: config.k_range.min,
                max: config.k_range.max,
            });
        }
        // Computed outside the lock; a concurrent duplicate yields the same value.
        let computed = match select_k_scored(dataset, subset, config.k_range, &config.fit, config.seed) {
            Ok(v) => Some(Arc::new(v)),
            Err(Error::AllFitsFailed { .. }) => None,
            Err(e) => return Err(e),
        };
        self.fits
            .lock()
            .expect("cache lock")
            .insert(subset.clone(), computed.clone());
        computed.ok_or(Error::AllFitsFailed {
            min: config.k_range.min,
            max: config.k_range.max,
        })
    }
}

/// BIC difference for removing `proposal` from `current`.
pub fn bic_diff(
    proposal: usize,
    current: &TimepointSet,
    dataset: &LongitudinalDataset,
    config: &SelectionConfig,
) -> Result<(f64, ProposalRecord)> {
    bic_diff_cached(proposal, current, dataset, config, &ClusterCache::new())
}

/// [`bic_diff`] drawing clustering fits from `cache`.
pub fn bic_diff_cached(
    proposal: usize,
    current: &TimepointSet,
    dataset: &LongitudinalDataset,
    config: &SelectionConfig,
    cache: &ClusterCache,
) -> Result<(f64, ProposalRecord)> {
    if !current.contains(proposal) {
        return Err(Error::InvalidConfig(format!(
            "proposal {proposal} is not in the current set"
        )));
    }
    let with = cache.get(dataset, current, config)?;
    let rest = current.without(proposal);
    let (bic_without, k_without) = if rest.is_empty() {
        (0.0, None)
    } else {
        let w = cache.get(dataset, &rest, config)?;
        (w.0.bic, Some(w.0.k()))
    };
    let (bic_not_clust, regression) = not_clust_bic(proposal, &rest, dataset, config.fit.use_covariates)?;
    let raw = with.0.bic - (bic_without + bic_not_clust);
    // Equivalent models reached through different arithmetic differ only by rounding.
    let diff = if raw.abs() <= DIFF_TIE_TOLERANCE * with.0.bic.abs().max(1.0) {
        0.0
    } else {
        raw
    };
    Ok((
        diff,
        ProposalRecord {
            proposal,
            bic_clust_with: with.0.bic,
            k_with: with.0.k(),
            bic_clust_without: bic_without,
            k_without,
            bic_not_clust,
            regression_predictors: regression.predictor_indices,
            bic_diff: diff,
        },
    ))
}

/// BIC of both complete comparison models, including the shared sub-model
/// in which every time point outside `current` is regressed on `current`.
/// Returns `(BIC(M1), BIC(M2))`.
pub fn full_comparison_bics(
    proposal: usize,
    current: &TimepointSet,
    dataset: &LongitudinalDataset,
    config: &SelectionConfig,
    cache: &ClusterCache,
) -> Result<(f64, f64)> {
    let (_, rec) = bic_diff_cached(proposal, current, dataset, config, cache)?;
    let shared: f64 = (0..dataset.n_timepoints())
        .filter(|&j| !current.contains(j))
        .map(|j| not_clust_bic(j, current, dataset, config.fit.use_covariates).map(|(b, _)| b))
        .sum::<Result<f64>>()?;
    let m1 = rec.bic_clust_with + shared;
    let m2 = rec.bic_clust_without + rec.bic_not_clust + shared;
    Ok((m1, m2))
}

fn proposals_for(search: SearchKind, current: &TimepointSet) -> Vec<usize> {
    match search {
        SearchKind::Backward => current.indices().to_vec(),
        SearchKind::Monotone => {
            let mut v: Vec<usize> = current.first().into_iter().chain(current.last()).collect();
            v.dedup();
            v
        }
    }
}

/// Runs a backward search over all time points of `dataset`.
pub fn run_search(
    search: SearchKind,
    dataset: &LongitudinalDataset,
    config: &SelectionConfig,
) -> Result<SelectionResult> {
    run_search_cached(search, dataset, config, &ClusterCache::new())
}

pub fn run_search_cached(
    search: SearchKind,
    dataset: &LongitudinalDataset,
    config: &SelectionConfig,
    cache: &ClusterCache,
) -> Result<SelectionResult> {
    if dataset.n_timepoints() == 0 {
        return Err(Error::EmptySubset);
    }
    if config.threshold.is_nan() {
        return Err(Error::InvalidConfig("threshold is NaN".into()));
    }
    let all = dataset.all_timepoints();
    let mut current = all.clone();
    let mut removed = Vec::new();
    let mut trace = Vec::new();

    while !current.is_empty() {
        let proposals = proposals_for(search, &current);
        let records = proposals
            .par_iter()
            .map(|&p| bic_diff_cached(p, &current, dataset, config, cache).map(|(_, r)| r))
            .collect::<Result<Vec<_>>>()?;

        let mut best = 0;
        for (i, r) in records.iter().enumerate().skip(1) {
            let b = records[best].bic_diff;
            if r.bic_diff > b + DIFF_TIE_TOLERANCE * b.abs().max(1.0) {
                best = i;
            }
        }
        let chosen = records[best].proposal;
        let diff = records[best].bic_diff;
        let remove = diff > config.threshold;
        trace.push(SearchStep {
            step: trace.len(),
            current: current.clone(),
            proposals: records,
            chosen,
            removed: remove,
        });
        if !remove {
            break;
        }
        current = current.without(chosen);
        removed.push(Removal {
            index: chosen,
            bic_diff: diff,
        });
    }

    let full = cache.get(dataset, &all, config)?;
    let (final_fit, final_scores) = if current.is_empty() {
        (None, Vec::new())
    } else {
        let f = cache.get(dataset, &current, config)?;
        (Some(f.0.clone()), f.1.clone())
    };
    let no_clustering_structure = final_fit.as_ref().map_or(true, |f| f.k() == 1);
    Ok(SelectionResult {
        search,
        selected: current.clone(),
        final_fit,
        final_scores,
        full_fit: full.0.clone(),
        full_scores: full.1.clone(),
        state: SelectionState {
            current,
            removed,
            trace,
        },
        no_clustering_structure,
    })
}

/// Basic greedy backward search.
pub fn backward_greedy_search(dataset: &LongitudinalDataset, config: &SelectionConfig) -> Result<SelectionResult> {
    run_search(SearchKind::Backward, dataset, config)
}

/// Backward search that only ever drops the earliest or latest time point.
pub fn backward_monotone_search(dataset: &LongitudinalDataset, config: &SelectionConfig) -> Result<SelectionResult> {
    run_search(SearchKind::Monotone, dataset, config)
}
