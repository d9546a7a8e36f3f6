//! Per-instance search for a template whose calibrated prediction matches
//! the gold label.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::PromptSpace;
use crate::scoring::Scorer;
use crate::task::{Instance, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub instance_id: usize,
    /// `space_index` of the first template that predicts the gold label.
    pub found: Option<usize>,
    /// Templates scored for this instance. Prior calls are not included.
    pub cost: usize,
}

/// Scores templates in `space_index` order until one predicts
/// `instance.label`, or until `budget` templates have been tried.
pub fn search_lottery(
    instance_id: usize,
    instance: &Instance,
    space: &PromptSpace,
    task: &TaskSpec,
    scorer: &Scorer<'_>,
    budget: usize,
) -> Result<SearchResult> {
    if budget > space.len() {
        return Err(Error::BudgetTooLarge {
            budget,
            size: space.len(),
        });
    }
    task.check(instance)?;
    for (cost, template) in space.iter().take(budget).enumerate() {
        let dist = scorer.calibrated(instance, &template, task, space.lexicon())?;
        if dist.prediction() == instance.label {
            return Ok(SearchResult {
                instance_id,
                found: Some(template.space_index),
                cost: cost + 1,
            });
        }
    }
    Ok(SearchResult {
        instance_id,
        found: None,
        cost: budget,
    })
}

/// Runs [`search_lottery`] for every instance; instances are searched
/// concurrently and results come back in dataset order.
pub fn search_dataset(
    dataset: &[Instance],
    space: &PromptSpace,
    task: &TaskSpec,
    scorer: &Scorer<'_>,
    budget: usize,
) -> Result<Vec<SearchResult>> {
    scorer.map_concurrent(dataset.len(), |i| search_lottery(i, &dataset[i], space, task, scorer, budget))
}

pub fn success_rate(results: &[SearchResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::EmptyInput("search results"));
    }
    let found = results.iter().filter(|r| r.found.is_some()).count();
    Ok(found as f64 / results.len() as f64)
}

pub fn mean_cost(results: &[SearchResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::EmptyInput("search results"));
    }
    let total: usize = results.iter().map(|r| r.cost).sum();
    Ok(total as f64 / results.len() as f64)
}

/// The `n` most expensive instances, costliest first; ties by instance id.
pub fn hardest(results: &[SearchResult], n: usize) -> Vec<SearchResult> {
    let mut sorted = results.to_vec();
    sorted.sort_by(|a, b| {
        b.found
            .is_none()
            .cmp(&a.found.is_none())
            .then(b.cost.cmp(&a.cost))
            .then(a.instance_id.cmp(&b.instance_id))
    });
    sorted.truncate(n);
    sorted
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{build_space, WordLexicon};
    use crate::scoring::{PlantedRule, SyntheticOracle};
    use crate::task::{Metric, ModelStyle, TaskFormat, Verbalizer};

    fn task() -> TaskSpec {
        let v = Verbalizer::new(vec!["great".into(), "bad".into()]).unwrap();
        TaskSpec::new("toy", TaskFormat::Single, v, Metric::Accuracy, ModelStyle::Masked).unwrap()
    }

    fn space() -> PromptSpace {
        build_space(WordLexicon::from_words(&["it", "he"], &["was", "is"], &["so", "really"]).unwrap()).unwrap()
    }

    fn r(id: usize, found: Option<usize>, cost: usize) -> SearchResult {
        SearchResult {
            instance_id: id,
            found,
            cost,
        }
    }

    #[test]
    fn first_template_hit_costs_one() {
        // "cue" pushes class 0 far above the noise for every template
        let oracle = SyntheticOracle::new(1).with_rule(PlantedRule::Bias {
            word: "cue".into(),
            class: 0,
            weight: 20.0,
        });
        let scorer = Scorer::new(&oracle);
        let res = search_lottery(0, &Instance::single("a cue", 0), &space(), &task(), &scorer, 8).unwrap();
        assert_eq!(res, r(0, Some(0), 1));
        // the other label is never predicted
        let res = search_lottery(1, &Instance::single("a cue", 1), &space(), &task(), &scorer, 8).unwrap();
        assert_eq!(res, r(1, None, 8));
    }

    #[test]
    fn zero_budget() {
        let oracle = SyntheticOracle::new(1);
        let scorer = Scorer::new(&oracle);
        let res = search_lottery(3, &Instance::single("x", 0), &space(), &task(), &scorer, 0).unwrap();
        assert_eq!(res, r(3, None, 0));
        assert_eq!(scorer.calls().total(), 0);
        assert!(matches!(
            search_lottery(3, &Instance::single("x", 0), &space(), &task(), &scorer, 9),
            Err(Error::BudgetTooLarge { budget: 9, size: 8 })
        ));
    }

    #[test]
    fn summaries() {
        let all = [r(0, Some(1), 2), r(1, Some(0), 1)];
        assert_eq!(success_rate(&all).unwrap(), 1.0);
        let some = [r(0, Some(1), 2), r(1, Some(0), 1), r(2, None, 8), r(3, Some(4), 5)];
        assert_eq!(success_rate(&some).unwrap(), 0.75);
        assert_eq!(mean_cost(&[r(0, Some(0), 1), r(1, Some(2), 3)]).unwrap(), 2.0);
        assert_eq!(mean_cost(&[r(0, Some(4), 5)]).unwrap(), 5.0);
        assert!(matches!(success_rate(&[]), Err(Error::EmptyInput(_))));
        assert!(matches!(mean_cost(&[]), Err(Error::EmptyInput(_))));

        let hard = hardest(&some, 2);
        assert_eq!(hard[0].instance_id, 2);
        assert_eq!(hard[1].instance_id, 3);
    }

    #[test]
    fn dataset_search_matches_sequential() {
        let oracle = SyntheticOracle::new(9);
        let data: Vec<_> = (0..12).map(|i| Instance::single(format!("text number {i}"), i % 2)).collect();
        let par = Scorer::with_concurrency(&oracle, 4);
        let seq = Scorer::with_concurrency(&oracle, 1);
        let a = search_dataset(&data, &space(), &task(), &par, 8).unwrap();
        let b = search_dataset(&data, &space(), &task(), &seq, 8).unwrap();
        assert_eq!(a, b);
        for res in &a {
            if let Some(i) = res.found {
                assert_eq!(res.cost, i + 1);
            }
        }
        let spent: usize = a.iter().map(|r| r.cost).sum();
        assert_eq!(par.calls().instance as usize, spent);
    }
}
