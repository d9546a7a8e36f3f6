//! Task wiring: how an instance and a template are wrapped into model input,
//! and which label word stands for which class.

use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{template_words, PromptTemplate, WordLexicon};

/// Placeholder the backend replaces with its own mask token.
pub const MASK: &str = "<MASK>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskFormat {
    Single,
    Pair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    BinaryF1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelStyle {
    Masked,
    NextToken,
}

impl ModelStyle {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelStyle::Masked => "masked",
            ModelStyle::NextToken => "next_token",
        }
    }
}

impl fmt::Display for ModelStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Class `i` is read out through `label_words[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Verbalizer {
    label_words: Vec<String>,
}

impl Verbalizer {
    pub fn new(label_words: Vec<String>) -> Result<Self> {
        if label_words.len() < 2 {
            return Err(Error::InvalidTask(format!(
                "a verbalizer needs at least 2 label words, got {}",
                label_words.len()
            )));
        }
        for (i, w) in label_words.iter().enumerate() {
            if w.is_empty() {
                return Err(Error::InvalidTask(format!("label word {i} is empty")));
            }
            if label_words[..i].contains(w) {
                return Err(Error::InvalidTask(format!("label word {w:?} repeated")));
            }
        }
        Ok(Self { label_words })
    }

    pub fn label_words(&self) -> &[String] {
        &self.label_words
    }

    pub fn num_classes(&self) -> usize {
        self.label_words.len()
    }
}

impl TryFrom<Vec<String>> for Verbalizer {
    type Error = Error;

    fn try_from(words: Vec<String>) -> Result<Self> {
        Verbalizer::new(words)
    }
}

impl From<Verbalizer> for Vec<String> {
    fn from(v: Verbalizer) -> Self {
        v.label_words
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTask")]
pub struct TaskSpec {
    pub name: String,
    pub format: TaskFormat,
    #[serde(rename = "label_words")]
    pub verbalizer: Verbalizer,
    pub metric: Metric,
    pub model_style: ModelStyle,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    name: String,
    format: TaskFormat,
    label_words: Verbalizer,
    #[serde(default = "default_metric")]
    metric: Metric,
    #[serde(default = "default_style")]
    model_style: ModelStyle,
}

fn default_metric() -> Metric {
    Metric::Accuracy
}

fn default_style() -> ModelStyle {
    ModelStyle::Masked
}

impl TryFrom<RawTask> for TaskSpec {
    type Error = Error;

    fn try_from(raw: RawTask) -> Result<Self> {
        TaskSpec::new(raw.name, raw.format, raw.label_words, raw.metric, raw.model_style)
    }
}

impl TaskSpec {
    pub fn new(
        name: impl Into<String>,
        format: TaskFormat,
        verbalizer: Verbalizer,
        metric: Metric,
        model_style: ModelStyle,
    ) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidTask("task name is empty".into()));
        }
        if metric == Metric::BinaryF1 && verbalizer.num_classes() != 2 {
            return Err(Error::InvalidTask(format!(
                "binary_f1 needs exactly 2 classes, task `{name}` has {}",
                verbalizer.num_classes()
            )));
        }
        Ok(Self {
            name,
            format,
            verbalizer,
            metric,
            model_style,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.verbalizer.num_classes()
    }

    /// Checks that `instance` fits this task's format and label set.
    pub fn check(&self, instance: &Instance) -> Result<()> {
        match (self.format, instance.text2.is_some()) {
            (TaskFormat::Single, true) => {
                return Err(Error::FormatMismatch {
                    task: self.name.clone(),
                    expected: "a single text",
                    found: "a text pair",
                })
            }
            (TaskFormat::Pair, false) => {
                return Err(Error::FormatMismatch {
                    task: self.name.clone(),
                    expected: "a text pair",
                    found: "a single text",
                })
            }
            _ => {}
        }
        if instance.label >= self.num_classes() {
            return Err(Error::LabelOutOfRange {
                label: instance.label,
                classes: self.num_classes(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text2: Option<String>,
    pub label: usize,
}

impl Instance {
    pub fn single(text: impl Into<String>, label: usize) -> Self {
        Self {
            text: text.into(),
            text2: None,
            label,
        }
    }

    pub fn pair(text: impl Into<String>, text2: impl Into<String>, label: usize) -> Self {
        Self {
            text: text.into(),
            text2: Some(text2.into()),
            label,
        }
    }
}

/// Reads a JSON Lines dataset and validates every row against `task`.
pub fn load_dataset(path: &Path, task: &TaskSpec) -> Result<Vec<Instance>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_owned(),
            line: n + 1,
            message,
        };
        let inst: Instance = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        task.check(&inst).map_err(|e| parse_err(e.to_string()))?;
        out.push(inst);
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, data: &[Instance]) -> Result<()> {
    let mut text = String::new();
    for inst in data {
        text.push_str(&serde_json::to_string(inst)?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Wraps `instance` with `template` into the text sent to the backend.
pub fn render(
    instance: &Instance,
    template: &PromptTemplate,
    task: &TaskSpec,
    lexicon: &WordLexicon,
) -> Result<String> {
    task.check(instance)?;
    let prompt = prompt_phrase(template, lexicon)?;
    Ok(wrap(task, &prompt, &instance.text, instance.text2.as_deref().unwrap_or("")))
}

/// The template wrapped around empty text, used for the prompt prior.
/// Both segments are emptied for pair tasks.
pub fn render_empty(template: &PromptTemplate, task: &TaskSpec, lexicon: &WordLexicon) -> Result<String> {
    let prompt = prompt_phrase(template, lexicon)?;
    Ok(wrap(task, &prompt, "", ""))
}

fn prompt_phrase(template: &PromptTemplate, lexicon: &WordLexicon) -> Result<String> {
    let (noun, verb, third) = template_words(template, lexicon)?;
    Ok(format!("{noun} {verb} {third}"))
}

// Segments are joined by single spaces; empty segments are dropped so that
// an empty text never leaves a doubled or leading separator behind.
fn wrap(task: &TaskSpec, prompt: &str, text: &str, text2: &str) -> String {
    let join = |parts: &[&str]| {
        parts
            .iter()
            .filter(|p| !p.is_empty())
            .copied()
            .collect::<Vec<_>>()
            .join(" ")
    };
    match (task.model_style, task.format) {
        (ModelStyle::Masked, TaskFormat::Single) => join(&[text, &format!("{prompt} {MASK}")]),
        (ModelStyle::Masked, TaskFormat::Pair) => join(&[text, &format!("{prompt}? {MASK},"), text2]),
        (ModelStyle::NextToken, TaskFormat::Single) => join(&[text, prompt]) + " ",
        (ModelStyle::NextToken, TaskFormat::Pair) => join(&[text, text2, &format!("{prompt}?")]) + " ",
    }
}
