//! Growth mixture models for repeated-measures data, with backward selection
//! of the time points that actually carry cluster structure.
//!
//! The pieces, bottom-up:
//!
//! - [`dataset`]: rectangular subject x time data and its long CSV form.
//! - [`init`]: k-means starting partitions.
//! - [`mixture`]: EM for conditional-independence mixtures of per-time-point
//!   regressions, BIC, and choice of the number of components.
//! - [`regression`]: BIC-selected linear regressions for the non-clustering model.
//! - [`selection`]: BIC-difference backward searches (greedy and monotone).
//! - [`evaluation`]: ARI, fitted values, RMSE, model comparison.
//! - [`simulation`]: synthetic designs and the replicated study harness.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod init;
mod lstsq;
pub mod mixture;
pub mod regression;
pub mod seed;
pub mod selection;
pub mod simulation;

pub use dataset::{parse_long_csv, write_long_csv, CsvSchema, LongitudinalDataset, TimepointSet};
pub use error::{Error, Result};
pub use evaluation::{ari, compare_models, fitted_values, rmse, ComparisonReport, Grid, PredictionMode, Truth};
pub use init::{kmeans_init, InitAssignment};
pub use mixture::{
    bic_of, component_logdensity, e_step, fit_em, loglik, m_step, map_assign, select_k, FitConfig, FitResult,
    GmmModel, KRange, Posteriors,
};
pub use regression::{not_clust_bic, ols_fit, residualize_on_covariates, stepwise_bic_regression, RegressionModel};
pub use selection::{
    backward_greedy_search, backward_monotone_search, bic_diff, run_search, SearchKind, SelectionConfig,
    SelectionResult,
};
pub use simulation::{preset_config, run_study, simulate, Preset, SimulatedDataset, SimulationConfig, StudyReport};
