//! Test-time use of the strong-prompt set: simple averaging of calibrated
//! distributions, or per-instance selection of the member with the largest
//! entropy reduction from its prior.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{PromptSpace, Slot};
use crate::scoring::{CalibratedDistribution, Scorer};
use crate::search::{metric, PromptStats};
use crate::task::{Instance, Metric, TaskSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongPromptSet {
    /// `space_index` values in ranking order.
    pub templates: Vec<usize>,
    pub source_task: String,
    pub source_stats: Vec<PromptStats>,
}

impl StrongPromptSet {
    /// Builds the set from stats already sorted in ranking order.
    pub fn from_ranked(source_task: impl Into<String>, ranked: Vec<PromptStats>) -> Result<Self> {
        if ranked.is_empty() {
            return Err(Error::EmptyInput("strong prompt set"));
        }
        let templates: Vec<usize> = ranked.iter().map(|s| s.space_index).collect();
        let unique: BTreeSet<_> = templates.iter().collect();
        if unique.len() != templates.len() {
            return Err(Error::InvalidParameter("strong prompt set has duplicate templates".into()));
        }
        Ok(Self {
            templates,
            source_task: source_task.into(),
            source_stats: ranked,
        })
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleStrategy {
    Vote,
    Mi,
}

impl fmt::Display for EnsembleStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnsembleStrategy::Vote => "vote",
            EnsembleStrategy::Mi => "mi",
        })
    }
}

/// Componentwise mean of the member distributions.
pub fn ensemble_vote(p_list: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = p_list.first().ok_or(Error::EmptyInput("ensemble"))?;
    let mut sum = vec![0.0; first.len()];
    for p in p_list {
        if p.len() != first.len() {
            return Err(Error::DimensionMismatch {
                left: first.len(),
                right: p.len(),
            });
        }
        for (s, v) in sum.iter_mut().zip(p) {
            *s += v;
        }
    }
    let t = p_list.len() as f64;
    Ok(sum.into_iter().map(|s| s / t).collect())
}

/// Position of the member with the largest mutual information; the earliest
/// member wins ties.
pub fn select_mi(members: &[CalibratedDistribution]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in members.iter().enumerate() {
        let mi = d.mutual_information();
        if best.is_none_or(|(_, b)| mi > b) {
            best = Some((i, mi));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::EmptyInput("ensemble"))
}

/// Picks the member of `strong` with the largest mutual information for
/// `instance` and returns its `space_index` with its calibrated
/// distribution.
pub fn ensemble_mi(
    instance: &Instance,
    strong: &StrongPromptSet,
    task: &TaskSpec,
    space: &PromptSpace,
    scorer: &Scorer<'_>,
) -> Result<(usize, Vec<f64>)> {
    if strong.is_empty() {
        return Err(Error::EmptyInput("strong prompt set"));
    }
    let members = strong
        .templates
        .iter()
        .map(|&i| scorer.calibrated(instance, &space.template(i)?, task, space.lexicon()))
        .collect::<Result<Vec<_>>>()?;
    let pick = select_mi(&members)?;
    Ok((strong.templates[pick], members[pick].p.clone()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRow {
    pub instance_id: usize,
    /// Template selected for this instance (MI only).
    pub chosen: Option<usize>,
    pub prediction: usize,
    pub gold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub source_task: String,
    pub task: String,
    pub strategy: EnsembleStrategy,
    pub k: usize,
    pub metric: Metric,
    pub metric_value: f64,
    pub per_instance: Vec<EvalRow>,
}

impl EvalReport {
    /// Recomputes the metric from the per-instance rows.
    pub fn recompute_metric(&self) -> f64 {
        let preds: Vec<usize> = self.per_instance.iter().map(|r| r.prediction).collect();
        let gold: Vec<usize> = self.per_instance.iter().map(|r| r.gold).collect();
        metric::score(self.metric, &preds, &gold)
    }
}

pub fn evaluate_ensemble(
    testset: &[Instance],
    strong: &StrongPromptSet,
    strategy: EnsembleStrategy,
    task: &TaskSpec,
    space: &PromptSpace,
    scorer: &Scorer<'_>,
) -> Result<EvalReport> {
    if testset.is_empty() {
        return Err(Error::EmptyInput("test set"));
    }
    if strong.is_empty() {
        return Err(Error::EmptyInput("strong prompt set"));
    }
    // member-major: one batched pass over the test set per template
    let mut by_member = Vec::with_capacity(strong.len());
    for &idx in &strong.templates {
        let template = space.template(idx)?;
        by_member.push(scorer.calibrated_many(testset, &template, task, space.lexicon())?);
    }

    let mut rows = Vec::with_capacity(testset.len());
    for (i, inst) in testset.iter().enumerate() {
        let members: Vec<CalibratedDistribution> = by_member.iter().map(|m| m[i].clone()).collect();
        let (chosen, p) = match strategy {
            EnsembleStrategy::Vote => {
                let ps: Vec<Vec<f64>> = members.into_iter().map(|d| d.p).collect();
                (None, ensemble_vote(&ps)?)
            }
            EnsembleStrategy::Mi => {
                let pick = select_mi(&members)?;
                (Some(strong.templates[pick]), members[pick].p.clone())
            }
        };
        rows.push(EvalRow {
            instance_id: i,
            chosen,
            prediction: crate::scoring::predict(&p),
            gold: inst.label,
        });
    }

    let mut report = EvalReport {
        source_task: strong.source_task.clone(),
        task: task.name.clone(),
        strategy,
        k: strong.len(),
        metric: task.metric,
        metric_value: 0.0,
        per_instance: rows,
    };
    report.metric_value = report.recompute_metric();
    Ok(report)
}

/// Evaluates a strong-prompt set found on one task against another task's
/// test set. Both tasks must have the same number of classes.
pub fn transfer_eval(
    source_strong: &StrongPromptSet,
    source_task: &TaskSpec,
    target_testset: &[Instance],
    target_task: &TaskSpec,
    strategy: EnsembleStrategy,
    space: &PromptSpace,
    scorer: &Scorer<'_>,
) -> Result<EvalReport> {
    if source_task.num_classes() != target_task.num_classes() {
        return Err(Error::ClassMismatch {
            source_classes: source_task.num_classes(),
            target_classes: target_task.num_classes(),
        });
    }
    evaluate_ensemble(target_testset, source_strong, strategy, target_task, space, scorer)
}

/// Draws up to `shots` instances of every class with a seeded shuffle.
/// The sample keeps dataset order.
pub fn sample_few_shot(dataset: &[Instance], num_classes: usize, shots: usize, seed: u64) -> Result<Vec<Instance>> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, inst) in dataset.iter().enumerate() {
        by_class
            .get_mut(inst.label)
            .ok_or(Error::LabelOutOfRange {
                label: inst.label,
                classes: num_classes,
            })?
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::new();
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            return Err(Error::InsufficientData(class));
        }
        members.shuffle(&mut rng);
        members.truncate(shots);
        picked.extend(members);
    }
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| dataset[i].clone()).collect())
}

/// How often each word occurs at each slot across the strong prompts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordFrequency {
    pub nouns: BTreeMap<String, usize>,
    pub verbs: BTreeMap<String, usize>,
    pub third: BTreeMap<String, usize>,
}

pub fn word_frequency(strong: &StrongPromptSet, space: &PromptSpace) -> Result<WordFrequency> {
    let mut freq = WordFrequency::default();
    for &idx in &strong.templates {
        let t = space.template(idx)?;
        for slot in Slot::ALL {
            let word = space.lexicon().group(slot)[t.slot_index(slot)].clone();
            let map = match slot {
                Slot::Noun => &mut freq.nouns,
                Slot::Verb => &mut freq.verbs,
                Slot::Third => &mut freq.third,
            };
            *map.entry(word).or_default() += 1;
        }
    }
    Ok(freq)
}
