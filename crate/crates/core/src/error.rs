use std::path::PathBuf;

/// Errors raised by dataset ingestion, fitting, and selection.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("subject `{subject}` has no observation at time {time}")]
    MissingCell { subject: String, time: f64 },
    #[error("subject `{subject}` has more than one row at time {time}")]
    DuplicateCell { subject: String, time: f64 },
    #[error("non-numeric value `{value}` in column `{column}` (line {line})")]
    NonNumericValue {
        column: String,
        value: String,
        line: u64,
    },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("cannot form {k} clusters from {n_subjects} subjects")]
    TooFewSubjects { k: usize, n_subjects: usize },
    #[error("time-point subset is empty")]
    EmptySubset,
    #[error("component {component} degenerate at time point {timepoint}: {reason}")]
    DegenerateComponent {
        component: usize,
        timepoint: usize,
        reason: &'static str,
    },
    #[error("all component densities underflow for subject {0}")]
    NumericalUnderflow(usize),
    #[error("every fit in k range {min}..={max} failed")]
    AllFitsFailed { min: usize, max: usize },
    #[error("design matrix is rank deficient")]
    RankDeficientDesign,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures of the numerical procedures (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateComponent { .. }
                | Error::NumericalUnderflow(_)
                | Error::AllFitsFailed { .. }
                | Error::RankDeficientDesign
        )
    }
}
