//! Run configuration.
//!
//! Values come from command-line flags, then an optional key-value config
//! file (TOML syntax, flat keys), then the `LOTTO_BACKEND_URL` environment
//! variable for the backend, then built-in defaults.
//!
//! Recognized config keys:
//!
//! | key               | type            | default          |
//! |-------------------|-----------------|------------------|
//! | `task`            | path            | required         |
//! | `lexicon`         | path            | built-in lexicon |
//! | `backend`         | URL or `synthetic:<seed>` | `LOTTO_BACKEND_URL` |
//! | `oracle_rules`    | path            | none             |
//! | `train`, `test`   | path            | per command      |
//! | `prompts`         | path            | per command      |
//! | `seed`            | integer         | 0                |
//! | `budget`          | integer         | size of the space|
//! | `k`               | integer         | 10               |
//! | `strategy`        | `vote` / `mi`   | `mi`             |
//! | `shots`           | integer list    | 8,16,32,64,128,256 |
//! | `runs`            | integer         | 5                |
//! | `batch_size`      | integer         | 16               |
//! | `threshold`       | float           | 0.7              |
//! | `max_concurrency` | integer         | 8                |
//! | `out`             | path            | `lotto-out`      |
//! | `cache`           | path            | none             |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleStrategy;
use crate::error::{Error, Result};
use crate::scoring::DEFAULT_MAX_CONCURRENCY;
use crate::search::{DEFAULT_BATCH_SIZE, DEFAULT_THRESHOLD};

pub const BACKEND_ENV: &str = "LOTTO_BACKEND_URL";
pub const DEFAULT_K: usize = 10;
pub const DEFAULT_SHOTS: [usize; 6] = [8, 16, 32, 64, 128, 256];
pub const DEFAULT_RUNS: usize = 5;
pub const DEFAULT_OUT: &str = "lotto-out";

/// A partially specified configuration; every source produces one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub task: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub backend: Option<String>,
    pub oracle_rules: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub k: Option<usize>,
    pub strategy: Option<EnsembleStrategy>,
    pub shots: Option<Vec<usize>>,
    pub runs: Option<usize>,
    pub batch_size: Option<usize>,
    pub threshold: Option<f64>,
    pub max_concurrency: Option<usize>,
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
}

impl PartialConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            message: e.message().to_owned(),
        })
    }

    /// Fills every unset field of `self` from `other`.
    pub fn or(self, other: PartialConfig) -> PartialConfig {
        PartialConfig {
            task: self.task.or(other.task),
            lexicon: self.lexicon.or(other.lexicon),
            backend: self.backend.or(other.backend),
            oracle_rules: self.oracle_rules.or(other.oracle_rules),
            train: self.train.or(other.train),
            test: self.test.or(other.test),
            prompts: self.prompts.or(other.prompts),
            seed: self.seed.or(other.seed),
            budget: self.budget.or(other.budget),
            k: self.k.or(other.k),
            strategy: self.strategy.or(other.strategy),
            shots: self.shots.or(other.shots),
            runs: self.runs.or(other.runs),
            batch_size: self.batch_size.or(other.batch_size),
            threshold: self.threshold.or(other.threshold),
            max_concurrency: self.max_concurrency.or(other.max_concurrency),
            out: self.out.or(other.out),
            cache: self.cache.or(other.cache),
        }
    }

    pub fn resolve(self) -> Result<RunConfig> {
        let task = self
            .task
            .ok_or_else(|| Error::InvalidParameter("no task config given (--task)".into()))?;
        let backend = self.backend.ok_or_else(|| {
            Error::InvalidParameter(format!("no backend given (--backend or {BACKEND_ENV})"))
        })?;
        let cfg = RunConfig {
            task,
            lexicon: self.lexicon,
            backend,
            oracle_rules: self.oracle_rules,
            train: self.train,
            test: self.test,
            prompts: self.prompts,
            seed: self.seed.unwrap_or(0),
            budget: self.budget,
            k: self.k.unwrap_or(DEFAULT_K),
            strategy: self.strategy.unwrap_or(EnsembleStrategy::Mi),
            shots: self.shots.unwrap_or_else(|| DEFAULT_SHOTS.to_vec()),
            runs: self.runs.unwrap_or(DEFAULT_RUNS),
            batch_size: self.batch_size.unwrap_or(DEFAULT_BATCH_SIZE),
            threshold: self.threshold.unwrap_or(DEFAULT_THRESHOLD),
            max_concurrency: self.max_concurrency.unwrap_or(DEFAULT_MAX_CONCURRENCY),
            out: self.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            cache: self.cache,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Fully resolved configuration; echoed into every run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: PathBuf,
    pub lexicon: Option<PathBuf>,
    pub backend: String,
    pub oracle_rules: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    pub seed: u64,
    pub budget: Option<usize>,
    pub k: usize,
    pub strategy: EnsembleStrategy,
    pub shots: Vec<usize>,
    pub runs: usize,
    pub batch_size: usize,
    pub threshold: f64,
    pub max_concurrency: usize,
    pub out: PathBuf,
    pub cache: Option<PathBuf>,
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidParameter(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if self.max_concurrency == 0 {
            return Err(Error::InvalidParameter("max_concurrency must be at least 1".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidParameter("runs must be at least 1".into()));
        }
        if self.shots.is_empty() || self.shots.contains(&0) {
            return Err(Error::InvalidParameter("shots must be a non-empty list of positive counts".into()));
        }
        Ok(())
    }

    /// A required path option, or a configuration error naming the flag.
    pub fn require<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter(format!("--{flag} is required for this command")))
    }
}
