//! Artifact writing. Files are written to a sibling temporary path and
//! renamed into place, so a reader never sees a half-written artifact.

use std::fs;
use std::io::Write;
use std::path::Path;

use growthmix::mixture::KScore;
use growthmix::selection::{ProposalRecord, SearchStep};
use growthmix::{FitResult, LongitudinalDataset, SelectionResult};
use serde::Serialize;

use crate::error::CliError;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let err = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(err)?;
    }
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(err)?;
    f.write_all(bytes).map_err(err)?;
    f.sync_all().map_err(err)?;
    drop(f);
    fs::rename(&tmp, path).map_err(err)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// `subject_id,map_label,p1..pK`; labels are 1-based like the component columns.
pub fn labels_csv(dataset: &LongitudinalDataset, fit: Option<&FitResult>) -> String {
    let k = fit.map_or(1, FitResult::k);
    let mut out = String::from("subject_id,map_label");
    for j in 1..=k {
        out.push_str(&format!(",p{j}"));
    }
    out.push('\n');
    for (s, id) in dataset.subject_ids().iter().enumerate() {
        out.push_str(&csv_field(id));
        match fit {
            Some(f) => {
                out.push_str(&format!(",{}", f.map_labels[s] + 1));
                for p in f.posteriors.row(s) {
                    out.push_str(&format!(",{p}"));
                }
            }
            None => out.push_str(",1,1"),
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Reads the label column (`map_label`, else `label`) of a labels CSV, with
/// subject ids when a `subject_id` column is present.
pub fn read_labels(path: &Path) -> Result<(Option<Vec<String>>, Vec<usize>), CliError> {
    let bad = |message: String| CliError::Labels {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let label_col = headers
        .iter()
        .position(|h| h == "map_label")
        .or_else(|| headers.iter().position(|h| h == "label"))
        .ok_or_else(|| bad("no `map_label` or `label` column".into()))?;
    let id_col = headers.iter().position(|h| h == "subject_id");
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let raw = rec.get(label_col).unwrap_or("");
        let l: usize = raw
            .trim()
            .parse()
            .map_err(|_| bad(format!("row {}: `{raw}` is not a label", i + 2)))?;
        labels.push(l);
        if let Some(c) = id_col {
            ids.push(rec.get(c).unwrap_or("").to_string());
        }
    }
    Ok((id_col.map(|_| ids), labels))
}

#[derive(Debug, Serialize)]
pub struct ComponentOut {
    /// Intercept first, then covariate slopes.
    pub coefficients: Vec<f64>,
    pub variance: f64,
}

#[derive(Debug, Serialize)]
pub struct TimepointParams {
    /// 1-based.
    pub timepoint: usize,
    pub components: Vec<ComponentOut>,
}

#[derive(Debug, Serialize)]
pub struct FitOut {
    pub k: usize,
    /// 1-based time points the model clusters on.
    pub timepoints: Vec<usize>,
    pub use_covariates: bool,
    pub loglik: f64,
    pub bic: f64,
    pub n_params: usize,
    pub n_iterations: usize,
    pub converged: bool,
    pub weights: Vec<f64>,
    pub params: Vec<TimepointParams>,
    pub k_scores: Vec<KScore>,
}

impl FitOut {
    pub fn new(fit: &FitResult, scores: &[KScore]) -> Self {
        let m = &fit.model;
        Self {
            k: fit.k(),
            timepoints: m.subset.one_based(),
            use_covariates: m.use_covariates,
            loglik: fit.loglik,
            bic: fit.bic,
            n_params: fit.n_params,
            n_iterations: fit.n_iterations,
            converged: fit.converged,
            weights: m.weights.clone(),
            params: m
                .subset
                .iter()
                .zip(&m.params)
                .map(|(n, row)| TimepointParams {
                    timepoint: n + 1,
                    components: row
                        .iter()
                        .map(|c| ComponentOut {
                            coefficients: c.coefficients.clone(),
                            variance: c.variance,
                        })
                        .collect(),
                })
                .collect(),
            k_scores: scores.to_vec(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ProposalOut {
    pub proposal: usize,
    pub bic_diff: f64,
    pub bic_clust_with: f64,
    pub k_with: usize,
    pub bic_clust_without: f64,
    pub k_without: Option<usize>,
    pub bic_not_clust: f64,
    pub regression_predictors: Vec<usize>,
}

impl From<&ProposalRecord> for ProposalOut {
    fn from(r: &ProposalRecord) -> Self {
        Self {
            proposal: r.proposal + 1,
            bic_diff: r.bic_diff,
            bic_clust_with: r.bic_clust_with,
            k_with: r.k_with,
            bic_clust_without: r.bic_clust_without,
            k_without: r.k_without,
            bic_not_clust: r.bic_not_clust,
            regression_predictors: r.regression_predictors.one_based(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct StepOut {
    pub step: usize,
    pub current: Vec<usize>,
    pub chosen: usize,
    pub removed: bool,
    pub proposals: Vec<ProposalOut>,
}

impl From<&SearchStep> for StepOut {
    fn from(s: &SearchStep) -> Self {
        Self {
            step: s.step,
            current: s.current.one_based(),
            chosen: s.chosen + 1,
            removed: s.removed,
            proposals: s.proposals.iter().map(ProposalOut::from).collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SelectionOut {
    pub search: growthmix::SearchKind,
    /// 1-based.
    pub selected: Vec<usize>,
    /// 1-based, in removal order.
    pub removed: Vec<usize>,
    pub no_clustering_structure: bool,
    pub trace: Vec<StepOut>,
    pub final_fit: Option<FitOut>,
    pub full_fit: FitOut,
}

impl SelectionOut {
    pub fn new(r: &SelectionResult) -> Self {
        Self {
            search: r.search,
            selected: r.selected.one_based(),
            removed: r.state.removed.iter().map(|x| x.index + 1).collect(),
            no_clustering_structure: r.no_clustering_structure,
            trace: r.state.trace.iter().map(StepOut::from).collect(),
            final_fit: r.final_fit.as_ref().map(|f| FitOut::new(f, &r.final_scores)),
            full_fit: FitOut::new(&r.full_fit, &r.full_scores),
        }
    }
}
