//! Run configuration: built-in defaults, then an optional flat `key = value`
//! file, then command-line flags.

use std::path::{Path, PathBuf};

use growthmix::{FitConfig, KRange, SearchKind, SelectionConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub k_range: KRange,
    pub search: SearchKind,
    pub threshold: f64,
    pub em_tol: f64,
    pub em_max_iter: usize,
    pub n_restarts: usize,
    pub use_covariates: bool,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        Self {
            k_range: KRange::default(),
            search: SearchKind::default(),
            threshold: 0.0,
            em_tol: fit.em_tol,
            em_max_iter: fit.em_max_iter,
            n_restarts: fit.n_restarts,
            use_covariates: false,
            seed: 0,
            output_dir: PathBuf::from("."),
        }
    }
}

/// Values that may come from a config file or from flags. `None` means unset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub search: Option<SearchKind>,
    pub threshold: Option<f64>,
    pub em_tol: Option<f64>,
    pub em_max_iter: Option<usize>,
    pub n_restarts: Option<usize>,
    pub use_covariates: Option<bool>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    /// Fields set in `other` win.
    pub fn merged(self, other: Overrides) -> Overrides {
        Overrides {
            k_min: other.k_min.or(self.k_min),
            k_max: other.k_max.or(self.k_max),
            search: other.search.or(self.search),
            threshold: other.threshold.or(self.threshold),
            em_tol: other.em_tol.or(self.em_tol),
            em_max_iter: other.em_max_iter.or(self.em_max_iter),
            n_restarts: other.n_restarts.or(self.n_restarts),
            use_covariates: other.use_covariates.or(self.use_covariates),
            seed: other.seed.or(self.seed),
            output_dir: other.output_dir.or(self.output_dir),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str, line: usize) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| CliError::Usage(format!("config line {line}: bad value `{raw}` for `{key}`")))
}

fn parse_bool(key: &str, raw: &str, line: usize) -> Result<bool, CliError> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!("config line {line}: bad value `{raw}` for `{key}`"))),
    }
}

/// Parses the flat config format. Blank lines and `#` comments are ignored;
/// `k_range` accepts `1..6` or `1-6`.
pub fn parse_config_text(text: &str) -> Result<Overrides, CliError> {
    let mut o = Overrides::default();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {line_no}: expected `key = value`")))?;
        let key = key.trim();
        let value = value.trim().trim_matches('"');
        match key {
            "k_range" => {
                let (lo, hi) = value
                    .split_once("..")
                    .or_else(|| value.split_once('-'))
                    .ok_or_else(|| CliError::Usage(format!("config line {line_no}: k_range must look like 1..6")))?;
                o.k_min = Some(parse_value(key, lo.trim(), line_no)?);
                o.k_max = Some(parse_value(key, hi.trim().trim_start_matches('='), line_no)?);
            }
            "k_min" => o.k_min = Some(parse_value(key, value, line_no)?),
            "k_max" => o.k_max = Some(parse_value(key, value, line_no)?),
            "search" => {
                o.search = Some(
                    value
                        .parse()
                        .map_err(|e: growthmix::Error| CliError::Usage(format!("config line {line_no}: {e}")))?,
                )
            }
            "threshold" => o.threshold = Some(parse_value(key, value, line_no)?),
            "em_tol" => o.em_tol = Some(parse_value(key, value, line_no)?),
            "em_max_iter" => o.em_max_iter = Some(parse_value(key, value, line_no)?),
            "n_restarts" => o.n_restarts = Some(parse_value(key, value, line_no)?),
            "use_covariates" => o.use_covariates = Some(parse_bool(key, value, line_no)?),
            "seed" => o.seed = Some(parse_value(key, value, line_no)?),
            "output_dir" => o.output_dir = Some(PathBuf::from(value)),
            other => return Err(CliError::Usage(format!("config line {line_no}: unknown key `{other}`"))),
        }
    }
    Ok(o)
}

pub fn read_config_file(path: &Path) -> Result<Overrides, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

impl RunConfig {
    /// Defaults overlaid with `overrides`. `use_covariates_default` is the
    /// command's own default for that flag.
    pub fn resolve(overrides: &Overrides, use_covariates_default: bool) -> Result<Self, CliError> {
        let d = RunConfig::default();
        let k_min = overrides.k_min.unwrap_or(d.k_range.min);
        let k_max = overrides.k_max.unwrap_or(d.k_range.max);
        let k_range = KRange::new(k_min, k_max).map_err(|e| CliError::Usage(e.to_string()))?;
        let cfg = RunConfig {
            k_range,
            search: overrides.search.unwrap_or(d.search),
            threshold: overrides.threshold.unwrap_or(d.threshold),
            em_tol: overrides.em_tol.unwrap_or(d.em_tol),
            em_max_iter: overrides.em_max_iter.unwrap_or(d.em_max_iter),
            n_restarts: overrides.n_restarts.unwrap_or(d.n_restarts),
            use_covariates: overrides.use_covariates.unwrap_or(use_covariates_default),
            seed: overrides.seed.unwrap_or(d.seed),
            output_dir: overrides.output_dir.clone().unwrap_or(d.output_dir),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !self.threshold.is_finite() {
            return Err(CliError::Usage("threshold must be finite".into()));
        }
        if !(self.em_tol > 0.0) {
            return Err(CliError::Usage("em_tol must be positive".into()));
        }
        if self.em_max_iter == 0 || self.n_restarts == 0 {
            return Err(CliError::Usage("em_max_iter and n_restarts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            em_tol: self.em_tol,
            em_max_iter: self.em_max_iter,
            n_restarts: self.n_restarts,
            use_covariates: self.use_covariates,
        }
    }

    pub fn selection_config(&self) -> SelectionConfig {
        SelectionConfig {
            k_range: self.k_range,
            threshold: self.threshold,
            fit: self.fit_config(),
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_file_round() {
        let o = parse_config_text(
            "# comment\nk_range = 2..4\nsearch = monotone\nthreshold = -1.5\nuse_covariates = yes\nseed = 42 # trailing\n",
        )
        .unwrap();
        let cfg = RunConfig::resolve(&o, false).unwrap();
        assert_eq!(cfg.k_range, KRange::new(2, 4).unwrap());
        assert_eq!(cfg.search, SearchKind::Monotone);
        assert_eq!(cfg.threshold, -1.5);
        assert!(cfg.use_covariates);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.n_restarts, 50);
    }

    #[test]
    fn flags_override_file() {
        let file = parse_config_text("seed = 1\nn_restarts = 9\n").unwrap();
        let flags = Overrides {
            seed: Some(2),
            ..Overrides::default()
        };
        let cfg = RunConfig::resolve(&file.merged(flags), true).unwrap();
        assert_eq!((cfg.seed, cfg.n_restarts, cfg.use_covariates), (2, 9, true));
    }

    #[test]
    fn bad_lines_are_usage_errors() {
        assert!(parse_config_text("nonsense").is_err());
        assert!(parse_config_text("colour = blue").is_err());
        assert!(parse_config_text("seed = x").is_err());
        let o = parse_config_text("k_range = 0..3").unwrap();
        assert!(RunConfig::resolve(&o, false).is_err());
        let inf = Overrides {
            threshold: Some(f64::INFINITY),
            ..Overrides::default()
        };
        assert!(RunConfig::resolve(&inf, false).is_err());
    }
}
