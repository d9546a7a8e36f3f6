//! Scoring backends and the calibration math built on top of them.

mod backend;
mod http;
pub mod math;
mod scorer;
mod synthetic;

pub use backend::ScoringBackend;
pub use http::{HttpBackend, ServerInfo};
pub use math::{calibrate, calibrate_unfloored, entropy, mutual_information, predict, softmax};
pub use scorer::{ApiCalls, CalibratedDistribution, PriorEntry, Scorer, DEFAULT_MAX_CONCURRENCY};
pub use synthetic::{PlantedRule, SyntheticOracle};

use crate::error::{Error, Result};
use crate::task::{ModelStyle, Verbalizer};

/// Label-word distribution of one already rendered text, without going
/// through a [`Scorer`] (no accounting, no batching).
pub fn raw_distribution(
    backend: &dyn ScoringBackend,
    style: ModelStyle,
    text: &str,
    verbalizer: &Verbalizer,
) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput("rendered text"));
    }
    if !backend.supports(style) {
        return Err(Error::UnsupportedStyle(style.as_str()));
    }
    let rows = backend.score(style, verbalizer.label_words(), &[text.to_owned()])?;
    let row = rows
        .into_iter()
        .next()
        .ok_or_else(|| Error::MalformedResponse("no logits returned".into()))?;
    softmax(&row)
}
