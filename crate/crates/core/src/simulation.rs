//! Synthetic longitudinal data with known cluster structure, and the
//! replicated study harness that scores selection against the truth.
//!
//! Every subject gets an independent standard-normal covariate at every time
//! point. At clustering time points the outcome is a group-specific line in
//! that covariate; elsewhere it is `0 + 1 * x` for everyone. Gaussian noise
//! is added throughout.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{LongitudinalDataset, TimepointSet};
use crate::error::{Error, Result};
use crate::evaluation::{compare_models, ComparisonReport, Grid, Partition, Truth};
use crate::selection::{run_search, SearchKind, SelectionConfig};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_subjects: usize,
    pub n_timepoints: usize,
    /// Group mixture weights.
    pub weights: Vec<f64>,
    /// 0-based.
    pub clustering_timepoints: TimepointSet,
    /// `slopes[i][g]`: slope of group g at the i-th clustering time point.
    pub slopes: Vec<Vec<f64>>,
    /// Same layout as `slopes`.
    pub intercepts: Vec<Vec<f64>>,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn n_groups(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.n_groups();
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if g == 0 || self.weights.iter().any(|w| !(*w >= 0.0)) {
            return bad("weights must be non-negative and non-empty".into());
        }
        if (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("weights {:?} do not sum to 1", self.weights));
        }
        if self.clustering_timepoints.last().map_or(false, |t| t >= self.n_timepoints) {
            return bad("clustering time point outside the grid".into());
        }
        let c = self.clustering_timepoints.len();
        for (name, m) in [("slopes", &self.slopes), ("intercepts", &self.intercepts)] {
            if m.len() != c || m.iter().any(|row| row.len() != g) {
                return bad(format!("{name} must be {c} x {g}"));
            }
        }
        if !(self.noise_sd >= 0.0) {
            return bad("noise_sd must be non-negative".into());
        }
        Ok(())
    }

    /// Noise-free mean of a subject in `group` with covariate `x` at time point `n`.
    pub fn mean(&self, n: usize, group: usize, x: f64) -> f64 {
        match self.clustering_timepoints.indices().binary_search(&n) {
            Ok(i) => self.intercepts[i][group] + self.slopes[i][group] * x,
            Err(_) => x,
        }
    }
}

/// The four reference designs: 20 time points, clustering at the 5th and
/// 15th, 400 subjects, noise sd 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    T1,
    T2,
    T3,
    T4,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "T1" => Ok(Self::T1),
            "T2" => Ok(Self::T2),
            "T3" => Ok(Self::T3),
            "T4" => Ok(Self::T4),
            other => Err(Error::InvalidConfig(format!("unknown preset `{other}`"))),
        }
    }
}

pub fn preset_config(preset: Preset) -> SimulationConfig {
    let balanced = vec![0.3, 0.3, 0.4];
    let (weights, first, second) = match preset {
        Preset::T1 => (balanced, vec![1.0, 3.0, -2.0], vec![1.0, 2.5, -0.5]),
        Preset::T2 => (balanced, vec![1.0, 2.5, -0.5], vec![1.0, 2.5, -0.5]),
        Preset::T3 => (balanced, vec![1.0, 3.0, -2.0], vec![1.0, 3.0, -2.0]),
        Preset::T4 => (vec![0.7, 0.15, 0.15], vec![1.0, 2.5, -0.5], vec![1.0, 2.5, -0.5]),
    };
    SimulationConfig {
        n_subjects: 400,
        n_timepoints: 20,
        weights,
        clustering_timepoints: TimepointSet::new(vec![4, 14]).expect("sorted"),
        slopes: vec![first, second],
        intercepts: vec![vec![0.0; 3]; 2],
        noise_sd: 0.5,
        seed: 0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDataset {
    pub dataset: LongitudinalDataset,
    pub true_labels: Partition,
    pub true_means: Grid,
}

/// Draws one dataset; identical configs give bit-identical output.
pub fn simulate(config: &SimulationConfig) -> Result<SimulatedDataset> {
    config.validate()?;
    let s_count = config.n_subjects;
    let n_count = config.n_timepoints;
    let mut rng = seed::rng(config.seed);

    let cumulative: Vec<f64> = config
        .weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let labels: Vec<usize> = (0..s_count)
        .map(|_| {
            let u: f64 = rng.gen::<f64>() * cumulative[cumulative.len() - 1];
            cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(cumulative.len() - 1)
        })
        .collect();

    let x: Vec<f64> = (0..s_count * n_count).map(|_| rng.sample(StandardNormal)).collect();
    let mut means = Grid::zeros(s_count, n_count);
    let mut outcomes = Vec::with_capacity(s_count * n_count);
    for s in 0..s_count {
        for n in 0..n_count {
            let m = config.mean(n, labels[s], x[s * n_count + n]);
            means.set(s, n, m);
            let e: f64 = rng.sample(StandardNormal);
            outcomes.push(m + config.noise_sd * e);
        }
    }
    let covariates = (0..n_count)
        .map(|n| (0..s_count).map(|s| x[s * n_count + n]).collect())
        .collect();
    let width = s_count.max(1).to_string().len();
    let dataset = LongitudinalDataset::new(
        (0..s_count).map(|s| format!("s{:0width$}", s + 1)).collect(),
        (1..=n_count).map(|t| t as f64).collect(),
        outcomes,
        covariates,
        vec![1; n_count],
    )?;
    Ok(SimulatedDataset {
        dataset,
        true_labels: labels,
        true_means: means,
    })
}

/// Metrics of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRow {
    pub rep: usize,
    /// 1-based time points.
    pub selected: Vec<usize>,
    /// Per true clustering time point, whether it was selected.
    pub true_points_selected: Vec<bool>,
    pub all_true_selected: bool,
    pub n_noise_selected: usize,
    #[serde(flatten)]
    pub comparison: ComparisonReport,
}

/// min, quartiles (linear interpolation), mean, max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q3: quantile(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

/// Aggregates laid out like the rows of the simulation result tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub n_reps: usize,
    pub n_completed: usize,
    pub n_failed: usize,
    /// 1-based time point -> % of reps selecting it.
    pub clustering_point_selected_pct: BTreeMap<usize, f64>,
    pub all_clustering_points_selected_pct: f64,
    /// Number of non-clustering time points selected -> % of reps.
    pub noise_points_selected_pct: BTreeMap<usize, f64>,
    /// K -> % of reps, selected-variable model (0 = nothing selected).
    pub k_selected_pct: BTreeMap<usize, f64>,
    /// K -> % of reps, all-variable model.
    pub k_full_pct: BTreeMap<usize, f64>,
    pub ari_diff: Option<FiveNumber>,
    pub higher_ari_selected_pct: f64,
    pub rmse_diff: Option<FiveNumber>,
    pub lower_rmse_selected_pct: f64,
}

impl StudySummary {
    /// Most frequent K of the selected-variable model (smallest on ties).
    pub fn modal_k_selected(&self) -> Option<usize> {
        modal(&self.k_selected_pct)
    }

    pub fn modal_k_full(&self) -> Option<usize> {
        modal(&self.k_full_pct)
    }
}

fn modal(h: &BTreeMap<usize, f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (&k, &p) in h {
        if best.map_or(true, |(_, bp)| p > bp) {
            best = Some((k, p));
        }
    }
    best.map(|(k, _)| k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepFailure {
    pub rep: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub simulation: SimulationConfig,
    pub search: SearchKind,
    pub selection: SelectionConfig,
    pub seed: u64,
    pub rows: Vec<RepRow>,
    pub failures: Vec<RepFailure>,
    pub summary: StudySummary,
}

fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

fn histogram_pct(values: impl Iterator<Item = usize>, total: usize) -> BTreeMap<usize, f64> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    counts.into_iter().map(|(k, c)| (k, percent(c, total))).collect()
}

/// Seed of the dataset drawn for replication `rep` of a study seeded with `seed`.
pub fn rep_simulation_seed(seed: u64, rep: usize) -> u64 {
    seed::child_seed(seed, &[seed::tag("simulate"), rep as u64])
}

/// Seed of the selection run on replication `rep`.
pub fn rep_selection_seed(seed: u64, rep: usize) -> u64 {
    seed::child_seed(seed, &[seed::tag("select"), rep as u64])
}

/// Simulates one replication and scores the selection on it.
pub fn run_rep(
    config: &SimulationConfig,
    search: SearchKind,
    selection: &SelectionConfig,
    seed: u64,
    rep: usize,
) -> Result<RepRow> {
    let sim_config = SimulationConfig {
        seed: rep_simulation_seed(seed, rep),
        ..config.clone()
    };
    let sim = simulate(&sim_config)?;
    let sel_config = SelectionConfig {
        seed: rep_selection_seed(seed, rep),
        ..*selection
    };
    let result = run_search(search, &sim.dataset, &sel_config)?;
    let comparison = compare_models(
        &result,
        &sim.dataset,
        Some(Truth {
            labels: &sim.true_labels,
            means: &sim.true_means,
        }),
    )?;
    let truth = &config.clustering_timepoints;
    let true_points_selected: Vec<bool> = truth.iter().map(|t| result.selected.contains(t)).collect();
    Ok(RepRow {
        rep,
        selected: result.selected.one_based(),
        all_true_selected: true_points_selected.iter().all(|&b| b),
        true_points_selected,
        n_noise_selected: result.selected.iter().filter(|&t| !truth.contains(t)).count(),
        comparison,
    })
}

/// Replicated simulation study. Replications run in parallel; each draws its
/// own child seeds, so the report does not depend on scheduling.
pub fn run_study(
    config: &SimulationConfig,
    n_reps: usize,
    search: SearchKind,
    selection: &SelectionConfig,
    seed: u64,
) -> Result<StudyReport> {
    if n_reps == 0 {
        return Err(Error::InvalidConfig("n_reps must be at least 1".into()));
    }
    config.validate()?;
    let outcomes: Vec<Result<RepRow>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| run_rep(config, search, selection, seed, rep))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (rep, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => rows.push(r),
            Err(e) => failures.push(RepFailure {
                rep,
                message: e.to_string(),
            }),
        }
    }
    let summary = summarize(config, &rows, n_reps);
    Ok(StudyReport {
        simulation: config.clone(),
        search,
        selection: *selection,
        seed,
        rows,
        failures,
        summary,
    })
}

pub fn summarize(config: &SimulationConfig, rows: &[RepRow], n_reps: usize) -> StudySummary {
    let done = rows.len();
    let clustering_point_selected_pct = config
        .clustering_timepoints
        .iter()
        .enumerate()
        .map(|(i, t)| (t + 1, percent(rows.iter().filter(|r| r.true_points_selected[i]).count(), done)))
        .collect();
    let ari: Vec<f64> = rows.iter().filter_map(|r| r.comparison.ari_diff).collect();
    let rmse: Vec<f64> = rows.iter().map(|r| r.comparison.rmse_diff).collect();
    StudySummary {
        n_reps,
        n_completed: done,
        n_failed: n_reps - done,
        clustering_point_selected_pct,
        all_clustering_points_selected_pct: percent(rows.iter().filter(|r| r.all_true_selected).count(), done),
        noise_points_selected_pct: histogram_pct(rows.iter().map(|r| r.n_noise_selected), done),
        k_selected_pct: histogram_pct(rows.iter().map(|r| r.comparison.k_selected.unwrap_or(0)), done),
        k_full_pct: histogram_pct(rows.iter().map(|r| r.comparison.k_full), done),
        ari_diff: FiveNumber::of(&ari),
        higher_ari_selected_pct: percent(ari.iter().filter(|&&d| d > 0.0).count(), done),
        rmse_diff: FiveNumber::of(&rmse),
        lower_rmse_selected_pct: percent(rmse.iter().filter(|&&d| d < 0.0).count(), done),
    }
}

impl StudyReport {
    /// One CSV line per completed replication, with header.
    pub fn rows_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let mut out = String::from(
            "rep,selected,all_true_selected,n_noise_selected,k_selected,k_full,\
             ari_selected,ari_full,ari_diff,rmse_selected,rmse_full,rmse_diff\n",
        );
        for r in &self.rows {
            let c = &r.comparison;
            let selected: Vec<String> = r.selected.iter().map(usize::to_string).collect();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.rep,
                selected.join(";"),
                r.all_true_selected,
                r.n_noise_selected,
                c.k_selected.map_or(String::new(), |k| k.to_string()),
                c.k_full,
                opt(c.ari_selected),
                opt(c.ari_full),
                opt(c.ari_diff),
                c.rmse_selected,
                c.rmse_full,
                c.rmse_diff,
            ));
        }
        out
    }
}
