//! Run configuration and the `key = value` settings file.
//!
//! Recognised keys:
//!
//! | key                   | meaning                                   | default          |
//! |-----------------------|-------------------------------------------|------------------|
//! | `aggregation_exponent`| pairwise matching steps per level         | 3                |
//! | `coarse_size`         | stop coarsening at this global size       | 40 * nd          |
//! | `max_levels`          | hierarchy depth cap                       | 40               |
//! | `pre_sweeps`          | l1-Jacobi sweeps before restriction       | 4                |
//! | `post_sweeps`         | l1-Jacobi sweeps after prolongation       | 4                |
//! | `coarsest_sweeps`     | l1-Jacobi sweeps on the coarsest level    | 20               |
//! | `max_iters`           | PCG iteration cap                         | 1000             |
//! | `rtol`                | relative residual tolerance, in (0, 1)    | 1e-6             |
//! | `precflag`            | 1 for AMG-PCG, 0 for plain CG             | 1                |
//!
//! Blank lines and lines starting with `#` are ignored. Keys may appear at
//! most once.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use matchmg::{CycleConfig, SetupConfig, SolveConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?} given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value {value:?} for {key}: {reason}")]
    InvalidValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("{0}")]
    Invalid(String),
}

/// The solver parameters a settings file can carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub aggregation_exponent: usize,
    /// `None` derives the target from the problem size.
    pub coarse_size: Option<usize>,
    pub max_levels: usize,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    pub coarsest_sweeps: usize,
    pub max_iters: usize,
    pub rtol: f64,
    pub precflag: bool,
}

impl Default for Settings {
    fn default() -> Self {
        let setup = SetupConfig::default();
        let cycle = CycleConfig::default();
        let solve = SolveConfig::default();
        Self {
            aggregation_exponent: setup.aggregation_exponent,
            coarse_size: None,
            max_levels: setup.max_levels,
            pre_sweeps: cycle.pre_sweeps,
            post_sweeps: cycle.post_sweeps,
            coarsest_sweeps: cycle.coarsest_sweeps,
            max_iters: solve.max_iters,
            rtol: solve.rtol,
            precflag: solve.precflag,
        }
    }
}

const KEYS: [&str; 9] = [
    "aggregation_exponent",
    "coarse_size",
    "max_levels",
    "pre_sweeps",
    "post_sweeps",
    "coarsest_sweeps",
    "max_iters",
    "rtol",
    "precflag",
];

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        line,
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn positive(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    let v: usize = parse_value(line, key, value)?;
    if v == 0 {
        return Err(ConfigError::InvalidValue {
            line,
            key: key.into(),
            value: value.into(),
            reason: "must be positive".into(),
        });
    }
    Ok(v)
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut s = Settings::default();
        let mut seen = [false; KEYS.len()];
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.into(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.into(),
                });
            }
            let Some(slot) = KEYS.iter().position(|&k| k == key) else {
                return Err(ConfigError::UnknownKey { line, key: key.into() });
            };
            if std::mem::replace(&mut seen[slot], true) {
                return Err(ConfigError::Duplicate { line, key: key.into() });
            }
            match key {
                "aggregation_exponent" => s.aggregation_exponent = positive(line, key, value)?,
                "coarse_size" => s.coarse_size = Some(positive(line, key, value)?),
                "max_levels" => s.max_levels = positive(line, key, value)?,
                "pre_sweeps" => s.pre_sweeps = positive(line, key, value)?,
                "post_sweeps" => s.post_sweeps = positive(line, key, value)?,
                "coarsest_sweeps" => s.coarsest_sweeps = positive(line, key, value)?,
                "max_iters" => s.max_iters = positive(line, key, value)?,
                "rtol" => {
                    let v: f64 = parse_value(line, key, value)?;
                    if !(v > 0.0 && v < 1.0) {
                        return Err(ConfigError::InvalidValue {
                            line,
                            key: key.into(),
                            value: value.into(),
                            reason: "must lie strictly between 0 and 1".into(),
                        });
                    }
                    s.rtol = v;
                }
                "precflag" => {
                    s.precflag = match value {
                        "1" | "true" => true,
                        "0" | "false" => false,
                        _ => {
                            return Err(ConfigError::InvalidValue {
                                line,
                                key: key.into(),
                                value: value.into(),
                                reason: "expected 0 or 1".into(),
                            })
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        Ok(s)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Poisson { nd: usize },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: Problem,
    pub ranks: usize,
    pub settings: Settings,
    /// Seeds the random right-hand side used for matrix files.
    pub seed: u64,
    pub format: ReportFormat,
}

impl RunConfig {
    pub fn new(problem: Problem, ranks: usize, settings: Settings) -> Self {
        Self {
            problem,
            ranks,
            settings,
            seed: 0,
            format: ReportFormat::Text,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ranks == 0 {
            return Err(ConfigError::Invalid("rank count must be positive".into()));
        }
        if let Problem::Poisson { nd: 0 } = self.problem {
            return Err(ConfigError::Invalid("grid size nd must be positive".into()));
        }
        let s = &self.settings;
        if !(s.rtol > 0.0 && s.rtol < 1.0) {
            return Err(ConfigError::Invalid(format!("rtol {} must lie strictly between 0 and 1", s.rtol)));
        }
        let counts = [
            ("aggregation_exponent", s.aggregation_exponent),
            ("max_levels", s.max_levels),
            ("pre_sweeps", s.pre_sweeps),
            ("post_sweeps", s.post_sweeps),
            ("coarsest_sweeps", s.coarsest_sweeps),
            ("max_iters", s.max_iters),
            ("coarse_size", s.coarse_size.unwrap_or(1)),
        ];
        if let Some((key, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(ConfigError::Invalid(format!("{key} must be positive")));
        }
        Ok(())
    }

    /// Coarsening target for a system of `n` unknowns.
    ///
    /// Without an explicit `coarse_size` this is `40 * nd`; for matrix files
    /// `nd` is the rounded cube root of `n`.
    pub fn coarse_size_for(&self, n: usize) -> usize {
        if let Some(c) = self.settings.coarse_size {
            return c;
        }
        let nd = match self.problem {
            Problem::Poisson { nd } => nd,
            Problem::File { .. } => ((n as f64).cbrt().round() as usize).max(1),
        };
        40 * nd
    }

    pub fn setup_config(&self, n: usize) -> SetupConfig {
        SetupConfig {
            aggregation_exponent: self.settings.aggregation_exponent,
            coarse_size_target: self.coarse_size_for(n),
            max_levels: self.settings.max_levels,
        }
    }

    pub fn cycle_config(&self) -> CycleConfig {
        CycleConfig {
            pre_sweeps: self.settings.pre_sweeps,
            post_sweeps: self.settings.post_sweeps,
            coarsest_sweeps: self.settings.coarsest_sweeps,
            ..CycleConfig::default()
        }
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            rtol: self.settings.rtol,
            max_iters: self.settings.max_iters,
            precflag: self.settings.precflag,
        }
    }
}
