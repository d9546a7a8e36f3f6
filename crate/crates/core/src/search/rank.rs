use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::metric;
use crate::error::{Error, Result};
use crate::lexicon::{PromptSpace, PromptTemplate};
use crate::scoring::Scorer;
use crate::task::{Instance, TaskSpec};

/// Training-set metric of one template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PromptStats {
    pub space_index: usize,
    pub metric_value: f64,
    pub n_evaluated: usize,
}

/// Calibrated predictions of `template` on every instance of `dataset`.
pub fn predictions(
    template: &PromptTemplate,
    dataset: &[Instance],
    task: &TaskSpec,
    space: &PromptSpace,
    scorer: &Scorer<'_>,
) -> Result<Vec<usize>> {
    Ok(scorer
        .calibrated_many(dataset, template, task, space.lexicon())?
        .iter()
        .map(|d| d.prediction())
        .collect())
}

pub fn evaluate_prompt(
    template: &PromptTemplate,
    dataset: &[Instance],
    task: &TaskSpec,
    space: &PromptSpace,
    scorer: &Scorer<'_>,
) -> Result<PromptStats> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let preds = predictions(template, dataset, task, space, scorer)?;
    let gold: Vec<usize> = dataset.iter().map(|i| i.label).collect();
    Ok(PromptStats {
        space_index: template.space_index,
        metric_value: metric::score(task.metric, &preds, &gold),
        n_evaluated: dataset.len(),
    })
}

/// Evaluates the given templates concurrently; output follows input order.
pub fn evaluate_templates(
    templates: &[PromptTemplate],
    dataset: &[Instance],
    task: &TaskSpec,
    space: &PromptSpace,
    scorer: &Scorer<'_>,
) -> Result<Vec<PromptStats>> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    scorer.map_concurrent(templates.len(), |i| evaluate_prompt(&templates[i], dataset, task, space, scorer))
}

/// Evaluates every template of the space, in `space_index` order.
pub fn evaluate_all(
    space: &PromptSpace,
    dataset: &[Instance],
    task: &TaskSpec,
    scorer: &Scorer<'_>,
) -> Result<Vec<PromptStats>> {
    let templates: Vec<_> = space.iter().collect();
    evaluate_templates(&templates, dataset, task, space, scorer)
}

/// Best metric first; equal metrics go to the lower `space_index`.
pub fn ranking_order(a: &PromptStats, b: &PromptStats) -> Ordering {
    b.metric_value
        .total_cmp(&a.metric_value)
        .then(a.space_index.cmp(&b.space_index))
}

/// Sorts `stats` into ranking order and keeps the first `k`.
pub fn top_k(mut stats: Vec<PromptStats>, k: usize) -> Vec<PromptStats> {
    stats.sort_by(ranking_order);
    stats.truncate(k);
    stats
}

/// The `k` best templates of the space on `dataset`.
pub fn rank_prompts(
    space: &PromptSpace,
    dataset: &[Instance],
    task: &TaskSpec,
    scorer: &Scorer<'_>,
    k: usize,
) -> Result<Vec<PromptStats>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    Ok(top_k(evaluate_all(space, dataset, task, scorer)?, k))
}
