//! On-disk artifacts: JSON reports, CSV tables, run manifests and the prior
//! cache.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::ensemble::{EvalReport, StrongPromptSet};
use crate::error::{Error, Result};
use crate::lexicon::PromptSpace;
use crate::scoring::{ApiCalls, PriorEntry};
use crate::search::{PromptStats, SearchResult};
use crate::task::TaskSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub success_rate: f64,
    pub mean_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub lexicon_source: String,
    pub task: String,
    pub backend_identity: String,
    pub seed: u64,
    pub budget: usize,
    pub results: Vec<SearchResult>,
    pub summary: SearchSummary,
}

/// Strong prompts handed from `rank`/`prune` to `ensemble`/`transfer`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptsFile {
    pub lexicon_source: String,
    pub backend_identity: String,
    pub task: TaskSpec,
    pub k: usize,
    pub prompts: StrongPromptSet,
    /// Prompt text of each template, parallel to `prompts.templates`.
    pub words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub source_task: String,
    pub target_task: String,
    pub lexicon_source: String,
    pub backend_identity: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiCallTotals {
    pub instance: u64,
    pub prior: u64,
    pub total: u64,
    pub priors_from_cache: usize,
}

impl ApiCallTotals {
    pub fn new(calls: ApiCalls, priors_from_cache: usize) -> Self {
        Self {
            instance: calls.instance,
            prior: calls.prior,
            total: calls.total(),
            priors_from_cache,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub lexicon_source: String,
    pub space_size: usize,
    pub backend_identity: String,
    pub seeds: Vec<u64>,
    pub api_calls: ApiCallTotals,
    pub outputs: Vec<String>,
}

/// Prior vectors persisted between runs. Entries are only reused when the
/// backend identity, lexicon and task definition all match.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CacheFile {
    pub backend_identity: String,
    pub lexicon_source: String,
    pub tasks: BTreeMap<String, TaskSpec>,
    pub priors: Vec<PriorEntry>,
}

impl CacheFile {
    pub fn load(path: &Path) -> Result<Option<Self>> {
        match std::fs::read_to_string(path) {
            Ok(text) => Ok(Some(serde_json::from_str(&text)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    /// Priors usable for `task`, or nothing if any identity differs.
    pub fn reusable(&self, backend_identity: &str, lexicon_source: &str, task: &TaskSpec) -> Vec<PriorEntry> {
        if self.backend_identity != backend_identity || self.lexicon_source != lexicon_source {
            return Vec::new();
        }
        if self.tasks.get(&task.name) != Some(task) {
            return Vec::new();
        }
        self.priors.iter().filter(|e| e.task == task.name).cloned().collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_owned(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Columns: `space_index, words, metric, n_evaluated`.
pub fn write_stats_csv(path: &Path, stats: &[PromptStats], space: &PromptSpace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["space_index", "words", "metric", "n_evaluated"])?;
    for s in stats {
        w.write_record([
            s.space_index.to_string(),
            space.prompt_text(s.space_index)?,
            s.metric_value.to_string(),
            s.n_evaluated.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_stats_csv(path: &Path) -> Result<Vec<PromptStats>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let bad = |what: &str| Error::Parse {
            path: path.to_owned(),
            line: rec.position().map_or(0, |p| p.line() as usize),
            message: format!("bad {what}"),
        };
        out.push(PromptStats {
            space_index: field(0).parse().map_err(|_| bad("space_index"))?,
            metric_value: field(2).parse().map_err(|_| bad("metric"))?,
            n_evaluated: field(3).parse().map_err(|_| bad("n_evaluated"))?,
        });
    }
    Ok(out)
}

/// Columns: `instance_id, chosen, chosen_words, prediction, gold`.
pub fn write_eval_csv(path: &Path, report: &EvalReport, space: &PromptSpace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["instance_id", "chosen", "chosen_words", "prediction", "gold"])?;
    for row in &report.per_instance {
        let (chosen, words) = match row.chosen {
            Some(i) => (i.to_string(), space.prompt_text(i)?),
            None => (String::new(), String::new()),
        };
        w.write_record([
            row.instance_id.to_string(),
            chosen,
            words,
            row.prediction.to_string(),
            row.gold.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Columns: `instance_id, found, cost`.
pub fn write_search_csv(path: &Path, results: &[SearchResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["instance_id", "found", "cost"])?;
    for r in results {
        w.write_record([
            r.instance_id.to_string(),
            r.found.map(|i| i.to_string()).unwrap_or_default(),
            r.cost.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{build_space, WordLexicon};
    use crate::task::{Metric, ModelStyle, TaskFormat, Verbalizer};
    use proptest::prelude::*;

    fn task(name: &str) -> TaskSpec {
        let v = Verbalizer::new(vec!["great".into(), "bad".into()]).unwrap();
        TaskSpec::new(name, TaskFormat::Single, v, Metric::Accuracy, ModelStyle::Masked).unwrap()
    }

    #[test]
    fn cache_reuse_requires_matching_identity() {
        let t = task("sst2");
        let cache = CacheFile {
            backend_identity: "m".into(),
            lexicon_source: "lex".into(),
            tasks: [(t.name.clone(), t.clone())].into(),
            priors: vec![PriorEntry {
                task: "sst2".into(),
                space_index: 3,
                q: vec![0.25, 0.75],
            }],
        };
        assert_eq!(cache.reusable("m", "lex", &t).len(), 1);
        assert!(cache.reusable("other", "lex", &t).is_empty());
        assert!(cache.reusable("m", "lex2", &t).is_empty());
        let mut changed = t.clone();
        changed.model_style = ModelStyle::NextToken;
        assert!(cache.reusable("m", "lex", &changed).is_empty());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        assert_eq!(CacheFile::load(&path).unwrap(), None);
        cache.save(&path).unwrap();
        assert_eq!(CacheFile::load(&path).unwrap(), Some(cache));
    }

    proptest! {
        #[test]
        fn stats_csv_round_trips_exactly(metrics in prop::collection::vec(0.0f64..=1.0, 1..8)) {
            let space = build_space(WordLexicon::from_words(&["a", "b"], &["c", "d"], &["e", "f"]).unwrap()).unwrap();
            let stats: Vec<_> = metrics
                .iter()
                .enumerate()
                .map(|(i, &m)| PromptStats { space_index: i, metric_value: m, n_evaluated: 3 })
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("s.csv");
            write_stats_csv(&path, &stats, &space).unwrap();
            prop_assert_eq!(read_stats_csv(&path).unwrap(), stats);
        }
    }
}
