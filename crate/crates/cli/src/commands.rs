//! The five commands. Each takes fully resolved inputs, writes its artifacts
//! under `config.output_dir`, and returns what it computed so callers (and
//! tests) can inspect it without re-reading files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use growthmix::mixture::{select_k_scored, KScore};
use growthmix::simulation::{rep_simulation_seed, StudySummary};
use growthmix::{
    ari, parse_long_csv, run_search, run_study, simulate, write_long_csv, CsvSchema, Error, FitResult,
    LongitudinalDataset, SelectionResult, SimulationConfig, StudyReport,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{labels_csv, read_labels, write_atomic, write_json, FitOut, SelectionOut};

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

fn load(data: &Path, schema: &CsvSchema) -> Result<LongitudinalDataset, CliError> {
    Ok(parse_long_csv(data, schema)?)
}

#[derive(Serialize)]
struct FitArtifact<'a> {
    command: &'static str,
    config: &'a RunConfig,
    data: String,
    n_subjects: usize,
    n_timepoints: usize,
    fit: FitOut,
}

#[derive(Serialize)]
struct FitSummary<'a> {
    command: &'static str,
    config: &'a RunConfig,
    k: usize,
    loglik: f64,
    bic: f64,
    n_params: usize,
    k_scores: &'a [KScore],
}

/// Chooses K over all time points and writes `fit_model.json`,
/// `fit_labels.csv` and `fit_summary.json`.
pub fn cmd_fit(data: &Path, schema: &CsvSchema, config: &RunConfig) -> Result<(FitResult, Vec<KScore>), CliError> {
    let dataset = load(data, schema)?;
    let (fit, scores) = select_k_scored(
        &dataset,
        &dataset.all_timepoints(),
        config.k_range,
        &config.fit_config(),
        config.seed,
    )?;
    let dir = &config.output_dir;
    write_json(
        &dir.join("fit_model.json"),
        &FitArtifact {
            command: "fit",
            config,
            data: path_string(data),
            n_subjects: dataset.n_subjects(),
            n_timepoints: dataset.n_timepoints(),
            fit: FitOut::new(&fit, &scores),
        },
    )?;
    write_atomic(&dir.join("fit_labels.csv"), labels_csv(&dataset, Some(&fit)).as_bytes())?;
    write_json(
        &dir.join("fit_summary.json"),
        &FitSummary {
            command: "fit",
            config,
            k: fit.k(),
            loglik: fit.loglik,
            bic: fit.bic,
            n_params: fit.n_params,
            k_scores: &scores,
        },
    )?;
    Ok((fit, scores))
}

#[derive(Serialize)]
struct SelectionArtifact<'a> {
    command: &'static str,
    config: &'a RunConfig,
    data: String,
    n_subjects: usize,
    n_timepoints: usize,
    selection: SelectionOut,
}

/// Runs the configured search and writes `selection.json`,
/// `labels_selected.csv` and `labels_full.csv`.
pub fn cmd_select(data: &Path, schema: &CsvSchema, config: &RunConfig) -> Result<SelectionResult, CliError> {
    let dataset = load(data, schema)?;
    let result = run_search(config.search, &dataset, &config.selection_config())?;
    let dir = &config.output_dir;
    write_json(
        &dir.join("selection.json"),
        &SelectionArtifact {
            command: "select",
            config,
            data: path_string(data),
            n_subjects: dataset.n_subjects(),
            n_timepoints: dataset.n_timepoints(),
            selection: SelectionOut::new(&result),
        },
    )?;
    write_atomic(
        &dir.join("labels_selected.csv"),
        labels_csv(&dataset, result.final_fit.as_ref()).as_bytes(),
    )?;
    write_atomic(&dir.join("labels_full.csv"), labels_csv(&dataset, Some(&result.full_fit)).as_bytes())?;
    Ok(result)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulatedRep {
    pub rep: usize,
    pub seed: u64,
    pub data_file: Option<String>,
    pub truth_file: Option<String>,
    /// Subjects drawn into each group.
    pub group_counts: Vec<usize>,
}

#[derive(Serialize)]
struct SimulationManifest<'a> {
    command: &'static str,
    config: &'a RunConfig,
    design: &'a str,
    simulation: &'a SimulationConfig,
    n_reps: usize,
    reps: &'a [SimulatedRep],
}

fn truth_csv(dataset: &LongitudinalDataset, labels: &[usize]) -> String {
    let mut out = String::from("subject_id,label\n");
    for (id, l) in dataset.subject_ids().iter().zip(labels) {
        let _ = writeln!(out, "{id},{}", l + 1);
    }
    out
}

/// Draws `n_reps` datasets with the same per-rep seeds as [`cmd_bench`] and
/// writes `simulation.json`, plus `rep_NNN.csv` / `rep_NNN_truth.csv` when
/// `write_data` is set. With `study` the selection study is run as well.
pub fn cmd_simulate(
    design: &str,
    simulation: &SimulationConfig,
    n_reps: usize,
    write_data: bool,
    study: bool,
    config: &RunConfig,
) -> Result<Vec<SimulatedRep>, CliError> {
    if n_reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    simulation.validate()?;
    let dir = &config.output_dir;
    let mut reps = Vec::with_capacity(n_reps);
    for rep in 0..n_reps {
        let seed = rep_simulation_seed(config.seed, rep);
        let sim = simulate(&SimulationConfig {
            seed,
            ..simulation.clone()
        })?;
        let mut group_counts = vec![0; simulation.n_groups()];
        for &l in &sim.true_labels {
            group_counts[l] += 1;
        }
        let (data_file, truth_file) = if write_data {
            let data_name = format!("rep_{rep:03}.csv");
            let truth_name = format!("rep_{rep:03}_truth.csv");
            let tmp = dir.join(format!(".{data_name}.{}.tmp", std::process::id()));
            std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
                path: dir.clone(),
                source,
            })?;
            write_long_csv(&sim.dataset, &tmp)?;
            std::fs::rename(&tmp, dir.join(&data_name)).map_err(|source| CliError::Write {
                path: dir.join(&data_name),
                source,
            })?;
            write_atomic(&dir.join(&truth_name), truth_csv(&sim.dataset, &sim.true_labels).as_bytes())?;
            (Some(data_name), Some(truth_name))
        } else {
            (None, None)
        };
        reps.push(SimulatedRep {
            rep,
            seed,
            data_file,
            truth_file,
            group_counts,
        });
    }
    write_json(
        &dir.join("simulation.json"),
        &SimulationManifest {
            command: "simulate",
            config,
            design,
            simulation,
            n_reps,
            reps: &reps,
        },
    )?;
    if study {
        let report = run_study(simulation, n_reps, config.search, &config.selection_config(), config.seed)?;
        write_study(dir, "study", "simulate", design, config, &report)?;
    }
    Ok(reps)
}

#[derive(Serialize)]
struct StudyArtifact<'a> {
    command: &'static str,
    config: &'a RunConfig,
    design: &'a str,
    simulation: &'a SimulationConfig,
    n_reps: usize,
    summary: &'a StudySummary,
    failures: &'a [growthmix::simulation::RepFailure],
}

fn write_study(
    dir: &Path,
    stem: &str,
    command: &'static str,
    design: &str,
    config: &RunConfig,
    report: &StudyReport,
) -> Result<(), CliError> {
    write_json(
        &dir.join(format!("{stem}_summary.json")),
        &StudyArtifact {
            command,
            config,
            design,
            simulation: &report.simulation,
            n_reps: report.summary.n_reps,
            summary: &report.summary,
            failures: &report.failures,
        },
    )?;
    write_atomic(&dir.join(format!("{stem}_rows.csv")), report.rows_csv().as_bytes())
}

/// Runs the replicated study and writes `bench_summary.json` and
/// `bench_rows.csv`. Returns the report and its printable table.
pub fn cmd_bench(
    design: &str,
    simulation: &SimulationConfig,
    n_reps: usize,
    config: &RunConfig,
) -> Result<(StudyReport, String), CliError> {
    if n_reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let report = run_study(simulation, n_reps, config.search, &config.selection_config(), config.seed)?;
    write_study(&config.output_dir, "bench", "bench", design, config, &report)?;
    let table = render_table(design, &report);
    Ok((report, table))
}

fn histogram_line(out: &mut String, label: &str, h: &std::collections::BTreeMap<usize, f64>) {
    let cells: Vec<String> = h.iter().map(|(k, p)| format!("{k}: {p:.0}%")).collect();
    let _ = writeln!(out, "{label:<36}{}", cells.join("  "));
}

/// Plain-text summary laid out like the reference result tables.
pub fn render_table(design: &str, report: &StudyReport) -> String {
    let s = &report.summary;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{design}: {} reps ({} completed, {} failed), search {}",
        s.n_reps, s.n_completed, s.n_failed, report.search
    );
    for (t, p) in &s.clustering_point_selected_pct {
        let _ = writeln!(out, "{:<36}{p:.0}%", format!("time point {t} selected"));
    }
    let _ = writeln!(out, "{:<36}{:.0}%", "both clustering points selected", s.all_clustering_points_selected_pct);
    histogram_line(&mut out, "non-clustering points selected", &s.noise_points_selected_pct);
    histogram_line(&mut out, "K, selected-variable model", &s.k_selected_pct);
    histogram_line(&mut out, "K, all-variable model", &s.k_full_pct);
    for (name, f) in [("ARI difference", &s.ari_diff), ("RMSE difference", &s.rmse_diff)] {
        match f {
            Some(f) => {
                let _ = writeln!(
                    out,
                    "{name:<36}min {:.3}  q1 {:.3}  median {:.3}  mean {:.3}  q3 {:.3}  max {:.3}",
                    f.min, f.q1, f.median, f.mean, f.q3, f.max
                );
            }
            None => {
                let _ = writeln!(out, "{name:<36}n/a");
            }
        }
    }
    let _ = writeln!(out, "{:<36}{:.0}%", "higher ARI, selected model", s.higher_ari_selected_pct);
    let _ = writeln!(out, "{:<36}{:.0}%", "lower RMSE, selected model", s.lower_rmse_selected_pct);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    pub ari: f64,
    pub n_subjects: usize,
    pub labels_a: String,
    pub labels_b: String,
}

/// ARI between two label files, matched by subject id when both carry one.
pub fn cmd_evaluate(a: &Path, b: &Path, out: Option<&PathBuf>) -> Result<Agreement, CliError> {
    let (ids_a, la) = read_labels(a)?;
    let (ids_b, lb) = read_labels(b)?;
    if la.len() != lb.len() {
        return Err(Error::LengthMismatch {
            left: la.len(),
            right: lb.len(),
        }
        .into());
    }
    let lb = match (ids_a, ids_b) {
        (Some(ia), Some(ib)) if ia != ib => {
            let index: std::collections::HashMap<&str, usize> =
                ib.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
            ia.iter()
                .map(|id| {
                    index.get(id.as_str()).map(|&i| lb[i]).ok_or_else(|| CliError::Labels {
                        path: b.to_path_buf(),
                        message: format!("subject `{id}` is missing"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?
        }
        _ => lb,
    };
    let agreement = Agreement {
        ari: ari(&la, &lb)?,
        n_subjects: la.len(),
        labels_a: path_string(a),
        labels_b: path_string(b),
    };
    if let Some(p) = out {
        write_json(p, &agreement)?;
    }
    Ok(agreement)
}
