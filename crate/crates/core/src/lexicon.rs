//! Prompt search space: part-of-speech word groups and their Cartesian
//! product.
//!
//! A prompt template is a `(noun, verb, third)` word triple. The third slot
//! draws from the union of prepositions, adjectives and adverbs. Templates
//! are enumerated noun-major, so `space_index` is a mixed-radix number
//! `noun * |verbs| * |third| + verb * |third| + third`.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const DEFAULT_LEXICON: &str = include_str!("../assets/default_lexicon.txt");

/// One of the three slots of a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Noun,
    Verb,
    Third,
}

impl Slot {
    pub const ALL: [Slot; 3] = [Slot::Noun, Slot::Verb, Slot::Third];

    pub fn name(self) -> &'static str {
        match self {
            Slot::Noun => "nouns",
            Slot::Verb => "verbs",
            Slot::Third => "third",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordLexicon {
    nouns: Vec<String>,
    verbs: Vec<String>,
    third: Vec<String>,
    source_id: String,
}

impl WordLexicon {
    pub fn new(
        nouns: Vec<String>,
        verbs: Vec<String>,
        third: Vec<String>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        for (slot, words) in Slot::ALL.into_iter().zip([&nouns, &verbs, &third]) {
            validate_group(slot.name(), words)?;
        }
        Ok(Self {
            nouns,
            verbs,
            third,
            source_id: source_id.into(),
        })
    }

    /// Convenience constructor for literal word lists.
    pub fn from_words(nouns: &[&str], verbs: &[&str], third: &[&str]) -> Result<Self> {
        let own = |ws: &[&str]| ws.iter().map(|w| w.to_string()).collect::<Vec<_>>();
        let (nouns, verbs, third) = (own(nouns), own(verbs), own(third));
        let source_id = format!("inline@{}", digest_groups(&nouns, &verbs, &third));
        Self::new(nouns, verbs, third, source_id)
    }

    /// The lexicon shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_LEXICON, "builtin:default-v1")
            .expect("bundled lexicon is well formed")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "lexicon".to_owned());
        Self::parse(&text, &stem)
    }

    /// Parses the sectioned text format. `name` becomes the prefix of
    /// `source_id`; a content digest is appended so that edited files are
    /// distinguishable.
    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut groups: [Option<Vec<String>>; 3] = [None, None, None];
        let mut current: Option<usize> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let section = match line {
                "#NOUNS" => Some(0),
                "#VERBS" => Some(1),
                "#THIRD" => Some(2),
                _ => None,
            };
            if let Some(idx) = section {
                if groups[idx].is_some() {
                    return Err(Error::LexiconSyntax {
                        line: n + 1,
                        message: format!("section {line} appears twice"),
                    });
                }
                groups[idx] = Some(Vec::new());
                current = Some(idx);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let Some(idx) = current else {
                return Err(Error::LexiconSyntax {
                    line: n + 1,
                    message: "word outside of a #NOUNS/#VERBS/#THIRD section".into(),
                });
            };
            groups[idx].as_mut().unwrap().push(line.to_owned());
        }
        let [nouns, verbs, third] = groups.map(Option::unwrap_or_default);
        let source_id = format!("{name}@{}", digest_groups(&nouns, &verbs, &third));
        Self::new(nouns, verbs, third, source_id)
    }

    /// Serializes back to the sectioned text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (header, words) in [("#NOUNS", &self.nouns), ("#VERBS", &self.verbs), ("#THIRD", &self.third)] {
            out.push_str(header);
            out.push('\n');
            for w in words {
                out.push_str(w);
                out.push('\n');
            }
        }
        out
    }

    pub fn group(&self, slot: Slot) -> &[String] {
        match slot {
            Slot::Noun => &self.nouns,
            Slot::Verb => &self.verbs,
            Slot::Third => &self.third,
        }
    }

    pub fn nouns(&self) -> &[String] {
        &self.nouns
    }

    pub fn verbs(&self) -> &[String] {
        &self.verbs
    }

    pub fn third(&self) -> &[String] {
        &self.third
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }
}

fn validate_group(name: &'static str, words: &[String]) -> Result<()> {
    if words.is_empty() {
        return Err(Error::EmptyGroup(name));
    }
    let mut seen = HashSet::with_capacity(words.len());
    for w in words {
        if w.is_empty() || w.chars().any(char::is_whitespace) {
            return Err(Error::InvalidWord { word: w.clone() });
        }
        if !seen.insert(w.as_str()) {
            return Err(Error::DuplicateWord {
                group: name,
                word: w.clone(),
            });
        }
    }
    Ok(())
}

fn digest_groups(nouns: &[String], verbs: &[String], third: &[String]) -> String {
    let mut hasher = Sha256::new();
    for group in [nouns, verbs, third] {
        for w in group {
            hasher.update(w.as_bytes());
            hasher.update(b"\n");
        }
        hasher.update(b"\x00");
    }
    let digest = hasher.finalize();
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}

/// A point of the search space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub noun_idx: usize,
    pub verb_idx: usize,
    pub third_idx: usize,
    pub space_index: usize,
}

impl PromptTemplate {
    pub fn slot_index(&self, slot: Slot) -> usize {
        match slot {
            Slot::Noun => self.noun_idx,
            Slot::Verb => self.verb_idx,
            Slot::Third => self.third_idx,
        }
    }
}

/// Returns the three words of `template`.
pub fn template_words<'a>(
    template: &PromptTemplate,
    lexicon: &'a WordLexicon,
) -> Result<(&'a str, &'a str, &'a str)> {
    let pick = |slot: Slot, idx: usize| -> Result<&'a str> {
        let group = lexicon.group(slot);
        group.get(idx).map(String::as_str).ok_or(Error::IndexOutOfRange {
            what: slot.name(),
            index: idx,
            size: group.len(),
        })
    };
    Ok((
        pick(Slot::Noun, template.noun_idx)?,
        pick(Slot::Verb, template.verb_idx)?,
        pick(Slot::Third, template.third_idx)?,
    ))
}

#[derive(Debug, Clone)]
pub struct PromptSpace {
    lexicon: WordLexicon,
    size: usize,
}

impl PromptSpace {
    pub fn lexicon(&self) -> &WordLexicon {
        &self.lexicon
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn template(&self, space_index: usize) -> Result<PromptTemplate> {
        if space_index >= self.size {
            return Err(Error::IndexOutOfRange {
                what: "space",
                index: space_index,
                size: self.size,
            });
        }
        let n_third = self.lexicon.third.len();
        let n_verbs = self.lexicon.verbs.len();
        Ok(PromptTemplate {
            noun_idx: space_index / (n_verbs * n_third),
            verb_idx: (space_index / n_third) % n_verbs,
            third_idx: space_index % n_third,
            space_index,
        })
    }

    /// Builds a template from per-slot indices.
    pub fn compose(&self, noun_idx: usize, verb_idx: usize, third_idx: usize) -> Result<PromptTemplate> {
        for (slot, idx) in Slot::ALL.into_iter().zip([noun_idx, verb_idx, third_idx]) {
            let size = self.lexicon.group(slot).len();
            if idx >= size {
                return Err(Error::IndexOutOfRange {
                    what: slot.name(),
                    index: idx,
                    size,
                });
            }
        }
        let n_third = self.lexicon.third.len();
        let n_verbs = self.lexicon.verbs.len();
        Ok(PromptTemplate {
            noun_idx,
            verb_idx,
            third_idx,
            space_index: noun_idx * n_verbs * n_third + verb_idx * n_third + third_idx,
        })
    }

    /// All templates in increasing `space_index` order.
    pub fn iter(&self) -> impl Iterator<Item = PromptTemplate> + '_ {
        (0..self.size).map(move |i| self.template(i).expect("index in range"))
    }

    pub fn words(&self, template: &PromptTemplate) -> Result<(&str, &str, &str)> {
        template_words(template, &self.lexicon)
    }

    /// Space-separated prompt text of the template at `space_index`.
    pub fn prompt_text(&self, space_index: usize) -> Result<String> {
        let (a, b, c) = self.words(&self.template(space_index)?)?;
        Ok(format!("{a} {b} {c}"))
    }
}

pub fn build_space(lexicon: WordLexicon) -> Result<PromptSpace> {
    for slot in Slot::ALL {
        validate_group(slot.name(), lexicon.group(slot))?;
    }
    let size = lexicon.nouns.len() * lexicon.verbs.len() * lexicon.third.len();
    Ok(PromptSpace { lexicon, size })
}

impl fmt::Display for PromptTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "#{} ({}, {}, {})",
            self.space_index, self.noun_idx, self.verb_idx, self.third_idx
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> WordLexicon {
        WordLexicon::from_words(&["a", "b"], &["c", "d"], &["e", "f"]).unwrap()
    }

    #[test]
    fn cartesian_product_of_two_by_two_by_two() {
        let space = build_space(small()).unwrap();
        assert_eq!(space.len(), 8);
        let first = space.template(0).unwrap();
        let last = space.template(7).unwrap();
        assert_eq!(space.words(&first).unwrap(), ("a", "c", "e"));
        assert_eq!(space.words(&last).unwrap(), ("b", "d", "f"));
    }

    #[test]
    fn singleton_space() {
        let lex = WordLexicon::from_words(&["a"], &["c"], &["e"]).unwrap();
        let space = build_space(lex).unwrap();
        assert_eq!(space.len(), 1);
        assert_eq!(space.template(0).unwrap().space_index, 0);
    }

    #[test]
    fn builtin_lexicon_size() {
        let space = build_space(WordLexicon::builtin()).unwrap();
        assert_eq!(space.len(), 76725);
        assert!(space.lexicon().source_id().starts_with("builtin:default-v1@"));
    }

    #[test]
    fn word_lookup() {
        let lex = WordLexicon::from_words(&["it"], &["is", "was"], &["so", "very", "really"]).unwrap();
        let t = PromptTemplate {
            noun_idx: 0,
            verb_idx: 1,
            third_idx: 2,
            space_index: 5,
        };
        assert_eq!(template_words(&t, &lex).unwrap(), ("it", "was", "really"));
        let bad = PromptTemplate { verb_idx: 2, ..t };
        assert!(matches!(
            template_words(&bad, &lex),
            Err(Error::IndexOutOfRange { what: "verbs", index: 2, size: 2 })
        ));
    }

    #[test]
    fn prompt_decomposes_into_slots() {
        let lex = WordLexicon::from_words(&["it", "he"], &["was", "work"], &["really", "just"]).unwrap();
        let space = build_space(lex).unwrap();
        let t = space.compose(1, 1, 1).unwrap();
        assert_eq!(space.words(&t).unwrap(), ("he", "work", "just"));
        assert_eq!(space.prompt_text(t.space_index).unwrap(), "he work just");
    }

    #[test]
    fn rejects_empty_and_duplicate_groups() {
        assert!(matches!(
            WordLexicon::from_words(&[], &["c"], &["e"]),
            Err(Error::EmptyGroup("nouns"))
        ));
        assert!(matches!(
            WordLexicon::from_words(&["a"], &["c", "c"], &["e"]),
            Err(Error::DuplicateWord { group: "verbs", .. })
        ));
        assert!(matches!(
            WordLexicon::from_words(&["a b"], &["c"], &["e"]),
            Err(Error::InvalidWord { .. })
        ));
    }

    #[test]
    fn parse_sections_and_comments() {
        let text = "# header\n#NOUNS\nit\n\n#VERBS\n# a comment\nwas\n#THIRD\nreally\nso\n";
        let lex = WordLexicon::parse(text, "t").unwrap();
        assert_eq!(lex.nouns(), ["it"]);
        assert_eq!(lex.verbs(), ["was"]);
        assert_eq!(lex.third(), ["really", "so"]);
        assert!(lex.source_id().starts_with("t@"));
        let again = WordLexicon::parse(&lex.to_text(), "t").unwrap();
        assert_eq!(again, lex);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            WordLexicon::parse("it\n#NOUNS\n", "t"),
            Err(Error::LexiconSyntax { line: 1, .. })
        ));
        assert!(matches!(
            WordLexicon::parse("#NOUNS\na\n#VERBS\nb\n", "t"),
            Err(Error::EmptyGroup("third"))
        ));
        assert!(matches!(
            WordLexicon::parse("#NOUNS\na\n#NOUNS\n", "t"),
            Err(Error::LexiconSyntax { line: 3, .. })
        ));
    }

    #[test]
    fn enumeration_is_stable() {
        let render = || {
            let space = build_space(small()).unwrap();
            space
                .iter()
                .map(|t| space.prompt_text(t.space_index).unwrap())
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(render(), render());
    }

    proptest! {
        #[test]
        fn enumeration_is_the_full_cartesian_product(n in 1usize..5, v in 1usize..5, t in 1usize..5) {
            let words = |p: &str, k: usize| (0..k).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
            let lex = WordLexicon::new(words("n", n), words("v", v), words("t", t), "prop").unwrap();
            let space = build_space(lex).unwrap();
            prop_assert_eq!(space.len(), n * v * t);

            let mut brute = Vec::new();
            for a in 0..n {
                for b in 0..v {
                    for c in 0..t {
                        brute.push((a, b, c));
                    }
                }
            }
            let listed: Vec<_> = space.iter().map(|x| (x.noun_idx, x.verb_idx, x.third_idx)).collect();
            prop_assert_eq!(&listed, &brute);
            for (i, tpl) in space.iter().enumerate() {
                prop_assert_eq!(tpl.space_index, i);
                let back = space.compose(tpl.noun_idx, tpl.verb_idx, tpl.third_idx).unwrap();
                prop_assert_eq!(back, tpl);
            }
            prop_assert!(space.template(space.len()).is_err());
        }
    }
}
