//! Optimization-free prompt search over a fixed space of three-word
//! prompts, with calibrated scoring, strong-prompt ranking, pruned search
//! and test-time prompt ensembling.

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod lexicon;
pub mod report;
pub mod scoring;
pub mod search;
pub mod task;

pub use error::{Error, Result};
pub use lexicon::{build_space, template_words, PromptSpace, PromptTemplate, Slot, WordLexicon};
pub use task::{render, render_empty, Instance, Metric, ModelStyle, TaskFormat, TaskSpec, Verbalizer};
