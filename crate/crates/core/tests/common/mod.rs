//! Toy world shared by the integration tests.
//!
//! Instances carry a cue word: `good` for class 0 and `awful` for class 1.
//! On its own a cue pulls the model toward the wrong class; the planted word
//! `really` in the prompt flips that and pushes toward the right one. Prompts
//! containing `really` are therefore the strong prompts.
#![allow(dead_code)]

pub mod brute;

use lotto::scoring::{PlantedRule, SyntheticOracle};
use lotto::{build_space, Instance, Metric, ModelStyle, PromptSpace, TaskFormat, TaskSpec, Verbalizer, WordLexicon};

pub const PLANTED: &str = "really";

pub const NOUNS: [&str; 4] = ["it", "he", "she", "this"];
pub const VERBS: [&str; 4] = ["was", "is", "seems", "felt"];
pub const THIRD: [&str; 5] = ["so", "really", "very", "quite", "just"];

pub fn lexicon() -> WordLexicon {
    WordLexicon::from_words(&NOUNS, &VERBS, &THIRD).unwrap()
}

pub fn space() -> PromptSpace {
    build_space(lexicon()).unwrap()
}

/// 4 x 4 x 4 space with the planted word in it.
pub fn space64() -> PromptSpace {
    build_space(WordLexicon::from_words(&NOUNS, &VERBS, &THIRD[..4]).unwrap()).unwrap()
}

/// 2 x 2 x 2 space for the smallest oracle checks.
pub fn tiny_space() -> PromptSpace {
    build_space(WordLexicon::from_words(&["it", "he"], &["was", "is"], &["so", "really"]).unwrap()).unwrap()
}

pub fn task_named(name: &str, labels: [&str; 2], metric: Metric) -> TaskSpec {
    let v = Verbalizer::new(labels.iter().map(|s| s.to_string()).collect()).unwrap();
    TaskSpec::new(name, TaskFormat::Single, v, metric, ModelStyle::Masked).unwrap()
}

pub fn task() -> TaskSpec {
    task_named("toy", ["great", "bad"], Metric::Accuracy)
}

pub fn rules() -> Vec<PlantedRule> {
    let bias = |word: &str, class| PlantedRule::Bias {
        word: word.into(),
        class,
        weight: 1.0,
    };
    let amp = |cue: &str, class| PlantedRule::Amplify {
        trigger: PLANTED.into(),
        cue: cue.into(),
        class,
        weight: 4.0,
    };
    vec![bias("good", 1), bias("awful", 0), amp("good", 0), amp("awful", 1)]
}

pub fn planted_oracle(seed: u64) -> SyntheticOracle {
    SyntheticOracle::new(seed).with_rules(rules())
}

const FILLER: [&str; 8] = ["movie", "plot", "cast", "ending", "score", "story", "pacing", "scene"];

/// `n` instances alternating between the two classes; `offset` shifts the
/// filler words so train and test differ.
pub fn dataset(n: usize, offset: usize) -> Vec<Instance> {
    (0..n)
        .map(|i| {
            let label = i % 2;
            let cue = if label == 0 { "good" } else { "awful" };
            let a = FILLER[(i + offset) % FILLER.len()];
            let b = FILLER[(i * 3 + offset + 1) % FILLER.len()];
            Instance::single(format!("The {a} and the {b} were {cue} #{}.", i + offset), label)
        })
        .collect()
}

pub fn items(data: &[Instance]) -> Vec<brute::Item> {
    data.iter().map(|i| (i.text.clone(), i.label)).collect()
}

pub fn world<'a>(oracle: &'a SyntheticOracle, space: &PromptSpace, task: &TaskSpec) -> brute::World<'a> {
    let lex = space.lexicon();
    brute::World {
        oracle,
        labels: task.verbalizer.label_words().to_vec(),
        nouns: lex.nouns().to_vec(),
        verbs: lex.verbs().to_vec(),
        third: lex.third().to_vec(),
    }
}
