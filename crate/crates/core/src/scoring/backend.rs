use crate::error::Result;
use crate::task::ModelStyle;

/// Anything that can return raw label-word logits for a batch of texts.
///
/// Implementations must be deterministic: the same `(texts, label_words)`
/// always yields the same logits. Each returned row has one entry per label
/// word, in label-word order.
pub trait ScoringBackend: Send + Sync {
    /// Stable identity of the served model; recorded in every report and
    /// used to key the prior cache.
    fn identity(&self) -> &str;

    fn supports(&self, style: ModelStyle) -> bool;

    /// Largest number of texts sent in one request.
    fn max_batch(&self) -> usize {
        32
    }

    fn score(&self, style: ModelStyle, label_words: &[String], texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

impl<B: ScoringBackend + ?Sized> ScoringBackend for &B {
    fn identity(&self) -> &str {
        (**self).identity()
    }

    fn supports(&self, style: ModelStyle) -> bool {
        (**self).supports(style)
    }

    fn max_batch(&self) -> usize {
        (**self).max_batch()
    }

    fn score(&self, style: ModelStyle, label_words: &[String], texts: &[String]) -> Result<Vec<Vec<f64>>> {
        (**self).score(style, label_words, texts)
    }
}

impl<B: ScoringBackend + ?Sized> ScoringBackend for Box<B> {
    fn identity(&self) -> &str {
        (**self).identity()
    }

    fn supports(&self, style: ModelStyle) -> bool {
        (**self).supports(style)
    }

    fn max_batch(&self) -> usize {
        (**self).max_batch()
    }

    fn score(&self, style: ModelStyle, label_words: &[String], texts: &[String]) -> Result<Vec<Vec<f64>>> {
        (**self).score(style, label_words, texts)
    }
}
