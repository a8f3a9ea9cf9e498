//! Argument definitions and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use growthmix::{preset_config, CsvSchema, Preset, SearchKind, SimulationConfig};

use crate::commands::{cmd_bench, cmd_evaluate, cmd_fit, cmd_select, cmd_simulate};
use crate::config::{read_config_file, Overrides, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "growthmix", version, about = "Growth mixture models with BIC-driven time-point selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a mixture on every time point, choosing K by BIC.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Select clustering time points by backward BIC-difference search.
    Select {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Draw datasets from a preset or a JSON design.
    Simulate {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Skip writing the per-rep dataset and truth CSVs.
        #[arg(long)]
        no_data: bool,
        /// Also run the selection study on the drawn datasets.
        #[arg(long)]
        study: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Replicated selection study with a table-style summary.
    Bench {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Adjusted Rand index between two label files.
    Evaluate {
        labels_a: PathBuf,
        labels_b: PathBuf,
        /// Also write the result as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Long-format CSV: one row per subject and time point.
    pub data: PathBuf,
    #[arg(long, default_value = "subject")]
    pub subject_col: String,
    #[arg(long, default_value = "time")]
    pub time_col: String,
    #[arg(long, default_value = "y")]
    pub outcome_col: String,
    /// Comma-separated covariate columns (default: every other column).
    #[arg(long, value_delimiter = ',')]
    pub covariate_cols: Option<Vec<String>>,
}

impl DataArgs {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            subject: self.subject_col.clone(),
            time: self.time_col.clone(),
            outcome: self.outcome_col.clone(),
            covariates: self.covariate_cols.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Reference design T1..T4.
    #[arg(long, conflicts_with = "design")]
    pub preset: Option<Preset>,
    /// JSON file holding a simulation design.
    #[arg(long)]
    pub design: Option<PathBuf>,
    /// Override the number of subjects per dataset.
    #[arg(long)]
    pub subjects: Option<usize>,
}

impl DesignArgs {
    /// Design name and configuration; defaults to preset T1.
    pub fn resolve(&self) -> Result<(String, SimulationConfig), CliError> {
        let (name, mut cfg) = match (&self.preset, &self.design) {
            (_, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
                let cfg: SimulationConfig = serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("bad design {}: {e}", path.display())))?;
                (path.display().to_string(), cfg)
            }
            (Some(p), None) => (format!("{p:?}"), preset_config(*p)),
            (None, None) => ("T1".to_string(), preset_config(Preset::T1)),
        };
        if let Some(s) = self.subjects {
            cfg.n_subjects = s;
        }
        cfg.validate()?;
        Ok((name, cfg))
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Flat `key = value` file; flags given here take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub search: Option<SearchKind>,
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub em_tol: Option<f64>,
    #[arg(long)]
    pub em_max_iter: Option<usize>,
    #[arg(long)]
    pub n_restarts: Option<usize>,
    /// Regress each time point on its covariates inside the mixture
    /// (default true; time points without covariate columns are unaffected).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub use_covariates: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short = 'o')]
    pub output_dir: Option<PathBuf>,
}

impl RunArgs {
    pub fn resolve(&self, use_covariates_default: bool) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(p) => read_config_file(p)?,
            None => Overrides::default(),
        };
        let flags = Overrides {
            k_min: self.k_min,
            k_max: self.k_max,
            search: self.search,
            threshold: self.threshold,
            em_tol: self.em_tol,
            em_max_iter: self.em_max_iter,
            n_restarts: self.n_restarts,
            use_covariates: self.use_covariates,
            seed: self.seed,
            output_dir: self.output_dir.clone(),
        };
        RunConfig::resolve(&file.merged(flags), use_covariates_default)
    }
}

/// Runs one parsed command; what it prints goes to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit { data, run } => {
            let cfg = run.resolve(true)?;
            let (fit, _) = cmd_fit(&data.data, &data.schema(), &cfg)?;
            println!("K = {}  loglik = {:.4}  BIC = {:.4}", fit.k(), fit.loglik, fit.bic);
        }
        Command::Select { data, run } => {
            let cfg = run.resolve(true)?;
            let r = cmd_select(&data.data, &data.schema(), &cfg)?;
            let k = r.final_fit.as_ref().map_or(0, |f| f.k());
            println!(
                "selected time points {:?}  K = {}  (all time points: K = {})",
                r.selected.one_based(),
                k,
                r.full_fit.k()
            );
        }
        Command::Simulate {
            design,
            reps,
            no_data,
            study,
            run,
        } => {
            let cfg = run.resolve(true)?;
            let (name, sim) = design.resolve()?;
            let written = cmd_simulate(&name, &sim, reps, !no_data, study, &cfg)?;
            println!("{} dataset(s) from {name} in {}", written.len(), cfg.output_dir.display());
        }
        Command::Bench { design, reps, run } => {
            let cfg = run.resolve(true)?;
            let (name, sim) = design.resolve()?;
            let started = std::time::Instant::now();
            let (_, table) = cmd_bench(&name, &sim, reps, &cfg)?;
            print!("{table}");
            eprintln!("elapsed {:.1}s", started.elapsed().as_secs_f64());
        }
        Command::Evaluate { labels_a, labels_b, out } => {
            let a = cmd_evaluate(&labels_a, &labels_b, out.as_ref())?;
            println!("{}", serde_json::to_string(&a)?);
        }
    }
    Ok(())
}
