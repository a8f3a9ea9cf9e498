//! Longitudinal data: S subjects observed on a shared grid of N time points,
//! each observation carrying an outcome and an optional covariate vector.
//!
//! Data enter and leave through a long CSV layout, one row per
//! (subject, time) pair:
//!
//! ```text
//! subject,time,y,x1,x2
//! s01,1,0.25,-1.3,0.7
//! ```
//!
//! Covariate columns are positional: a time point with `p_n` covariates uses
//! the first `p_n` covariate columns and leaves the rest empty.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered set of time-point indices in `[0, N)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimepointSet(Vec<usize>);

impl TimepointSet {
    /// Builds a set from indices that must already be strictly increasing.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "time-point indices must be strictly increasing: {indices:?}"
            )));
        }
        Ok(Self(indices))
    }

    /// Every time point of an `n`-point grid.
    pub fn all(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn first(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    /// Copy of the set with `index` removed.
    pub fn without(&self, index: usize) -> Self {
        Self(self.0.iter().copied().filter(|&i| i != index).collect())
    }

    /// Copy of the set with `index` inserted.
    pub fn with(&self, index: usize) -> Self {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&index) {
            v.insert(pos, index);
        }
        Self(v)
    }

    /// True when the indices form an unbroken run `a, a+1, ..., b`.
    pub fn is_contiguous(&self) -> bool {
        self.0.windows(2).all(|w| w[1] == w[0] + 1)
    }

    /// Indices rendered 1-based, for human-facing output.
    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }
}

impl FromIterator<usize> for TimepointSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut v: Vec<usize> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }
}

/// Rectangular longitudinal dataset. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalDataset {
    subject_ids: Vec<String>,
    times: Vec<f64>,
    /// Row-major S x N.
    outcomes: Vec<f64>,
    /// Per time point, row-major S x p_n.
    covariates: Vec<Vec<f64>>,
    covariate_counts: Vec<usize>,
}

impl LongitudinalDataset {
    /// Builds a dataset from row-major outcome values and per-time-point
    /// covariate blocks (`covariates[n]` is S x `covariate_counts[n]`).
    pub fn new(
        subject_ids: Vec<String>,
        times: Vec<f64>,
        outcomes: Vec<f64>,
        covariates: Vec<Vec<f64>>,
        covariate_counts: Vec<usize>,
    ) -> Result<Self> {
        let s = subject_ids.len();
        let n = times.len();
        if outcomes.len() != s * n {
            return Err(Error::InvalidDataset(format!(
                "expected {} outcome values, got {}",
                s * n,
                outcomes.len()
            )));
        }
        if let Some(bad) = outcomes.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("non-finite outcome {bad}")));
        }
        if covariates.len() != n || covariate_counts.len() != n {
            return Err(Error::InvalidDataset(
                "need one covariate block per time point".into(),
            ));
        }
        for (t, (block, &p)) in covariates.iter().zip(&covariate_counts).enumerate() {
            if block.len() != s * p {
                return Err(Error::InvalidDataset(format!(
                    "covariate block at time index {t} has {} values, expected {}",
                    block.len(),
                    s * p
                )));
            }
            if block.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "non-finite covariate at time index {t}"
                )));
            }
        }
        let mut seen = std::collections::HashSet::with_capacity(s);
        for id in &subject_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate subject id `{id}`")));
            }
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDataset("times must be strictly increasing".into()));
        }
        Ok(Self {
            subject_ids,
            times,
            outcomes,
            covariates,
            covariate_counts,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn n_timepoints(&self) -> usize {
        self.times.len()
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    /// Original time values, ascending; index `n` is time point `n`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn all_timepoints(&self) -> TimepointSet {
        TimepointSet::all(self.n_timepoints())
    }

    #[inline]
    pub fn outcome(&self, subject: usize, timepoint: usize) -> f64 {
        self.outcomes[subject * self.times.len() + timepoint]
    }

    /// Outcome values of every subject at one time point.
    pub fn outcome_column(&self, timepoint: usize) -> Vec<f64> {
        (0..self.n_subjects())
            .map(|s| self.outcome(s, timepoint))
            .collect()
    }

    pub fn covariate_counts(&self) -> &[usize] {
        &self.covariate_counts
    }

    #[inline]
    pub fn covariate_count(&self, timepoint: usize) -> usize {
        self.covariate_counts[timepoint]
    }

    /// Covariate vector x_sn.
    #[inline]
    pub fn covariates(&self, subject: usize, timepoint: usize) -> &[f64] {
        let p = self.covariate_counts[timepoint];
        &self.covariates[timepoint][subject * p..(subject + 1) * p]
    }

    /// Column `j` of the covariate block at one time point.
    pub fn covariate_column(&self, timepoint: usize, j: usize) -> Vec<f64> {
        (0..self.n_subjects())
            .map(|s| self.covariates(s, timepoint)[j])
            .collect()
    }

    /// Population variance of the outcome at one time point.
    pub fn outcome_variance(&self, timepoint: usize) -> f64 {
        let col = self.outcome_column(timepoint);
        let s = col.len() as f64;
        if col.is_empty() {
            return 0.0;
        }
        let mean = col.iter().sum::<f64>() / s;
        col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / s
    }
}

/// Column names used when reading a long CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub subject: String,
    pub time: String,
    pub outcome: String,
    /// Covariate columns in order. `None` takes every other column in header order.
    pub covariates: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            subject: "subject".into(),
            time: "time".into(),
            outcome: "y".into(),
            covariates: None,
        }
    }
}

fn parse_number(raw: &str, column: &str, line: u64) -> Result<f64> {
    let bad = || Error::NonNumericValue {
        column: column.to_string(),
        value: raw.to_string(),
        line,
    };
    let v: f64 = raw.trim().parse().map_err(|_| bad())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

struct Row {
    y: f64,
    x: Vec<Option<f64>>,
}

/// Reads a long-format CSV into a rectangular dataset.
pub fn parse_long_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LongitudinalDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_long_csv(file, schema)
}

/// Same as [`parse_long_csv`] over any reader.
pub fn read_long_csv<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<LongitudinalDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let subject_col = find(&schema.subject)?;
    let time_col = find(&schema.time)?;
    let y_col = find(&schema.outcome)?;
    let x_cols: Vec<(usize, String)> = match &schema.covariates {
        Some(names) => names
            .iter()
            .map(|n| find(n).map(|i| (i, n.clone())))
            .collect::<Result<_>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != subject_col && i != time_col && i != y_col)
            .map(|(i, h)| (i, h.to_string()))
            .collect(),
    };

    let mut subject_order: Vec<String> = Vec::new();
    let mut subject_index: HashMap<String, usize> = HashMap::new();
    // Keyed by time bit pattern so equal times collide exactly.
    let mut cells: Vec<BTreeMap<u64, Row>> = Vec::new();
    let mut time_values: BTreeMap<u64, f64> = BTreeMap::new();

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let subject = record.get(subject_col).unwrap_or("").to_string();
        let time = parse_number(record.get(time_col).unwrap_or(""), &schema.time, line)?;
        let y = parse_number(record.get(y_col).unwrap_or(""), &schema.outcome, line)?;
        let x = x_cols
            .iter()
            .map(|(i, name)| match record.get(*i).unwrap_or("") {
                "" => Ok(None),
                raw => parse_number(raw, name, line).map(Some),
            })
            .collect::<Result<Vec<_>>>()?;
        let idx = *subject_index.entry(subject.clone()).or_insert_with(|| {
            subject_order.push(subject.clone());
            cells.push(BTreeMap::new());
            subject_order.len() - 1
        });
        // Normalize -0.0 so it shares a key with 0.0.
        let time = if time == 0.0 { 0.0 } else { time };
        let key = time.to_bits();
        time_values.insert(key, time);
        if cells[idx].insert(key, Row { y, x }).is_some() {
            return Err(Error::DuplicateCell { subject, time });
        }
    }

    let mut times: Vec<f64> = time_values.values().copied().collect();
    times.sort_by(f64::total_cmp);
    let keys: Vec<u64> = times.iter().map(|t| t.to_bits()).collect();
    let n_subjects = subject_order.len();
    let n_times = times.len();

    let mut outcomes = Vec::with_capacity(n_subjects * n_times);
    for (s, subject) in subject_order.iter().enumerate() {
        for (key, &time) in keys.iter().zip(&times) {
            let row = cells[s].get(key).ok_or_else(|| Error::MissingCell {
                subject: subject.clone(),
                time,
            })?;
            outcomes.push(row.y);
        }
    }

    let mut covariate_counts = Vec::with_capacity(n_times);
    let mut covariates = Vec::with_capacity(n_times);
    for (n, key) in keys.iter().enumerate() {
        let mut p_n: Option<usize> = None;
        let mut block = Vec::new();
        for (s, subject) in subject_order.iter().enumerate() {
            let row = &cells[s][key];
            let present = row.x.iter().take_while(|v| v.is_some()).count();
            if row.x[present..].iter().any(Option::is_some) {
                return Err(Error::InvalidDataset(format!(
                    "subject `{subject}` at time {}: covariate columns must be filled left to right",
                    times[n]
                )));
            }
            match p_n {
                None => p_n = Some(present),
                Some(p) if p != present => {
                    return Err(Error::InvalidDataset(format!(
                        "subject `{subject}` has {present} covariates at time {}, others have {p}",
                        times[n]
                    )))
                }
                _ => {}
            }
            block.extend(row.x.iter().take(present).map(|v| v.unwrap_or_default()));
        }
        covariate_counts.push(p_n.unwrap_or(0));
        covariates.push(block);
    }

    LongitudinalDataset::new(subject_order, times, outcomes, covariates, covariate_counts)
}

/// Writes the dataset in long CSV layout. Values use the shortest decimal
/// form that parses back to the same `f64`.
pub fn write_long_csv(dataset: &LongitudinalDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = File::create(path).map_err(io_err)?;
    write_long_csv_to(dataset, &mut file)?;
    file.flush().map_err(io_err)
}

/// Same as [`write_long_csv`] into any writer.
pub fn write_long_csv_to<W: Write>(dataset: &LongitudinalDataset, writer: W) -> Result<()> {
    let p_max = dataset.covariate_counts.iter().copied().max().unwrap_or(0);
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["subject".to_string(), "time".into(), "y".into()];
    header.extend((1..=p_max).map(|j| format!("x{j}")));
    wtr.write_record(&header)?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for s in 0..dataset.n_subjects() {
        for (n, time) in dataset.times.iter().enumerate() {
            record.clear();
            record.push(dataset.subject_ids[s].clone());
            record.push(time.to_string());
            record.push(dataset.outcome(s, n).to_string());
            let x = dataset.covariates(s, n);
            record.extend(x.iter().map(f64::to_string));
            record.extend(std::iter::repeat(String::new()).take(p_max - x.len()));
            wtr.write_record(&record)?;
        }
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<writer>".into(),
        source,
    })
}
