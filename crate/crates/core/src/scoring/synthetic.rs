//! Deterministic stand-in for a language model.
//!
//! Logits are a pure function of `(seed, text, label_words)`: every label
//! word gets a hash-derived noise term in `[-noise, noise)`, and planted
//! rules add fixed weights when their words occur in the text. Words are
//! matched as whitespace-separated tokens with surrounding punctuation
//! stripped.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::backend::ScoringBackend;
use crate::error::{Error, Result};
use crate::task::ModelStyle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PlantedRule {
    /// `word` present: add `weight` to `class`.
    Bias { word: String, class: usize, weight: f64 },
    /// `trigger` and `cue` both present: add `weight` to `class`.
    Amplify {
        trigger: String,
        cue: String,
        class: usize,
        weight: f64,
    },
}

#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    seed: u64,
    noise: f64,
    num_classes: Option<usize>,
    rules: Vec<PlantedRule>,
    identity: String,
}

impl SyntheticOracle {
    pub fn new(seed: u64) -> Self {
        let mut oracle = Self {
            seed,
            noise: 1.0,
            num_classes: None,
            rules: Vec::new(),
            identity: String::new(),
        };
        oracle.refresh_identity();
        oracle
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self.refresh_identity();
        self
    }

    /// Rejects requests whose label set has a different size.
    pub fn with_num_classes(mut self, n: usize) -> Self {
        self.num_classes = Some(n);
        self
    }

    pub fn with_rules(mut self, rules: Vec<PlantedRule>) -> Self {
        self.rules = rules;
        self.refresh_identity();
        self
    }

    pub fn with_rule(mut self, rule: PlantedRule) -> Self {
        self.rules.push(rule);
        self.refresh_identity();
        self
    }

    /// Loads planted rules from a JSON array.
    pub fn load_rules(path: &Path) -> Result<Vec<PlantedRule>> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rules(&self) -> &[PlantedRule] {
        &self.rules
    }

    fn refresh_identity(&mut self) {
        if self.rules.is_empty() && self.noise == 1.0 {
            self.identity = format!("synthetic:{}", self.seed);
            return;
        }
        let mut h = Fnv::new();
        h.write(&self.noise.to_bits().to_le_bytes());
        h.write(serde_json::to_string(&self.rules).unwrap_or_default().as_bytes());
        self.identity = format!("synthetic:{}+{:016x}", self.seed, h.finish());
    }

    /// Logits for a single text.
    pub fn logits(&self, text: &str, label_words: &[String]) -> Vec<f64> {
        let tokens: HashSet<&str> = text
            .split_whitespace()
            .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
            .filter(|t| !t.is_empty())
            .collect();
        let mut out: Vec<f64> = label_words
            .iter()
            .map(|w| {
                let mut h = Fnv::new();
                h.write(&self.seed.to_le_bytes());
                h.write(text.as_bytes());
                h.write(&[0xff]);
                h.write(w.as_bytes());
                self.noise * (2.0 * unit(h.finish()) - 1.0)
            })
            .collect();
        for rule in &self.rules {
            match rule {
                PlantedRule::Bias { word, class, weight } => {
                    if tokens.contains(word.as_str()) {
                        if let Some(v) = out.get_mut(*class) {
                            *v += weight;
                        }
                    }
                }
                PlantedRule::Amplify {
                    trigger,
                    cue,
                    class,
                    weight,
                } => {
                    if tokens.contains(trigger.as_str()) && tokens.contains(cue.as_str()) {
                        if let Some(v) = out.get_mut(*class) {
                            *v += weight;
                        }
                    }
                }
            }
        }
        out
    }
}

impl ScoringBackend for SyntheticOracle {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn supports(&self, _style: ModelStyle) -> bool {
        true
    }

    fn score(&self, _style: ModelStyle, label_words: &[String], texts: &[String]) -> Result<Vec<Vec<f64>>> {
        if let Some(w) = label_words.iter().find(|w| w.is_empty() || w.contains(char::is_whitespace)) {
            return Err(Error::MultiTokenLabelWord(w.clone()));
        }
        if let Some(n) = self.num_classes {
            if n != label_words.len() {
                return Err(Error::DimensionMismatch {
                    left: n,
                    right: label_words.len(),
                });
            }
        }
        Ok(texts.iter().map(|t| self.logits(t, label_words)).collect())
    }
}

/// FNV-1a with a splitmix64 finalizer; stable across platforms and
/// processes.
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        let mut z = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 / (1u64 << 53) as f64
}
