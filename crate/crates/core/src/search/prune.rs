//! Batched search that stops evaluating templates whose words have scored
//! poorly so far.
//!
//! Each round samples a batch of still-valid, unevaluated templates,
//! evaluates them on the whole dataset and records each template's metric
//! against all three of its words. A template is valid while any of its
//! words is still unobserved, or while the mean of its three per-word mean
//! scores is at least the threshold. The search ends when no unevaluated
//! valid template is left.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rank::{evaluate_templates, PromptStats};
use crate::error::{Error, Result};
use crate::lexicon::{PromptSpace, PromptTemplate, Slot};
use crate::scoring::Scorer;
use crate::task::{Instance, TaskSpec};

pub const DEFAULT_BATCH_SIZE: usize = 16;
pub const DEFAULT_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub batch_size: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
        }
    }
}

/// Observed template metrics, per word.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WordScoreTable {
    nouns: Vec<Vec<f64>>,
    verbs: Vec<Vec<f64>>,
    third: Vec<Vec<f64>>,
}

impl WordScoreTable {
    pub fn new(space: &PromptSpace) -> Self {
        let lex = space.lexicon();
        Self {
            nouns: vec![Vec::new(); lex.nouns().len()],
            verbs: vec![Vec::new(); lex.verbs().len()],
            third: vec![Vec::new(); lex.third().len()],
        }
    }

    fn slot(&self, slot: Slot) -> &[Vec<f64>] {
        match slot {
            Slot::Noun => &self.nouns,
            Slot::Verb => &self.verbs,
            Slot::Third => &self.third,
        }
    }

    fn slot_mut(&mut self, slot: Slot) -> &mut Vec<Vec<f64>> {
        match slot {
            Slot::Noun => &mut self.nouns,
            Slot::Verb => &mut self.verbs,
            Slot::Third => &mut self.third,
        }
    }

    pub fn record(&mut self, template: &PromptTemplate, metric_value: f64) {
        for slot in Slot::ALL {
            self.slot_mut(slot)[template.slot_index(slot)].push(metric_value);
        }
    }

    pub fn observations(&self, slot: Slot, word_idx: usize) -> &[f64] {
        &self.slot(slot)[word_idx]
    }

    /// Mean observed score of a word; `None` until it has been observed.
    pub fn mean(&self, slot: Slot, word_idx: usize) -> Option<f64> {
        let obs = &self.slot(slot)[word_idx];
        (!obs.is_empty()).then(|| obs.iter().sum::<f64>() / obs.len() as f64)
    }

    fn means(&self, slot: Slot) -> Vec<Option<f64>> {
        (0..self.slot(slot).len()).map(|i| self.mean(slot, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneOutcome {
    /// Stats of every evaluated template, in `space_index` order.
    pub stats: Vec<PromptStats>,
    /// `space_index` of evaluated templates, in evaluation order.
    pub evaluation_order: Vec<usize>,
    pub rounds: usize,
    pub words: WordScoreTable,
}

pub fn pruned_search(
    space: &PromptSpace,
    dataset: &[Instance],
    task: &TaskSpec,
    scorer: &Scorer<'_>,
    config: &PruneConfig,
) -> Result<PruneOutcome> {
    if config.batch_size == 0 {
        return Err(Error::InvalidParameter("batch_size must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&config.threshold) {
        return Err(Error::InvalidParameter(format!(
            "threshold {} outside [0, 1]",
            config.threshold
        )));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut table = WordScoreTable::new(space);
    let mut evaluated = vec![false; space.len()];
    let mut all_stats: Vec<Option<PromptStats>> = vec![None; space.len()];
    let mut order = Vec::new();
    let mut rounds = 0;

    loop {
        let candidates = valid_unevaluated(space, &table, &evaluated, config.threshold);
        if candidates.is_empty() {
            break;
        }
        let take = config.batch_size.min(candidates.len());
        let mut picked: Vec<usize> = index::sample(&mut rng, candidates.len(), take)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        picked.sort_unstable();
        let templates = picked
            .iter()
            .map(|&i| space.template(i))
            .collect::<Result<Vec<_>>>()?;
        let stats = evaluate_templates(&templates, dataset, task, space, scorer)?;
        for (template, s) in templates.iter().zip(stats) {
            table.record(template, s.metric_value);
            evaluated[s.space_index] = true;
            all_stats[s.space_index] = Some(s);
            order.push(s.space_index);
        }
        rounds += 1;
    }

    Ok(PruneOutcome {
        stats: all_stats.into_iter().flatten().collect(),
        evaluation_order: order,
        rounds,
        words: table,
    })
}

/// Whether a template passes the word-score test.
pub fn is_valid(template: &PromptTemplate, table: &WordScoreTable, threshold: f64) -> bool {
    let means: Vec<Option<f64>> = Slot::ALL
        .iter()
        .map(|&s| table.mean(s, template.slot_index(s)))
        .collect();
    validity(&means, threshold)
}

fn validity(means: &[Option<f64>], threshold: f64) -> bool {
    if means.iter().any(Option::is_none) {
        return true;
    }
    let avg = means.iter().flatten().sum::<f64>() / means.len() as f64;
    avg >= threshold
}

fn valid_unevaluated(space: &PromptSpace, table: &WordScoreTable, evaluated: &[bool], threshold: f64) -> Vec<usize> {
    let [nouns, verbs, third] = Slot::ALL.map(|s| table.means(s));
    space
        .iter()
        .filter(|t| !evaluated[t.space_index])
        .filter(|t| validity(&[nouns[t.noun_idx], verbs[t.verb_idx], third[t.third_idx]], threshold))
        .map(|t| t.space_index)
        .collect()
}
