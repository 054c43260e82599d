use crate::chat::FILLERS;
use serde::{Deserialize, Serialize};
use std::fmt;

/// An ordered list of normalized words: non-empty, lowercase, no whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct WordSequence(Vec<String>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0:?} is not a normalized word")]
pub struct InvalidWord(pub String);

impl WordSequence {
    pub fn new(words: Vec<String>) -> Result<Self, InvalidWord> {
        if let Some(bad) = words.iter().find(|w| !is_normal_word(w)) {
            return Err(InvalidWord(bad.clone()));
        }
        Ok(Self(words))
    }

    /// Splits on whitespace and lowercases. No punctuation handling; use
    /// [`normalize`] for raw transcript text.
    pub fn from_text(text: &str) -> Self {
        Self(text.split_whitespace().map(str::to_lowercase).collect())
    }

    pub fn words(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

fn is_normal_word(w: &str) -> bool {
    !w.is_empty() && !w.chars().any(|c| c.is_whitespace() || c.is_uppercase())
}

impl TryFrom<Vec<String>> for WordSequence {
    type Error = InvalidWord;

    fn try_from(words: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(words)
    }
}

impl From<WordSequence> for Vec<String> {
    fn from(seq: WordSequence) -> Self {
        seq.0
    }
}

impl fmt::Display for WordSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationConfig {
    /// Remove filler words (um, uh, ...). Off by default.
    pub drop_fillers: bool,
    /// Keep fragments, reduced to the part before `@`. Off by default.
    pub keep_fragments: bool,
}

/// Turns reference or hypothesis text into comparable words.
///
/// Lowercases, drops punctuation, bracketed groups (gestures and other codes)
/// and time bullets. Hyphens and underscores split compounds; apostrophes
/// inside words are kept.
pub fn normalize(raw: &str, config: &NormalizationConfig) -> WordSequence {
    let mut words = Vec::new();
    for bare in bare_words(raw) {
        let trimmed = bare.trim_matches(|c: char| !c.is_alphanumeric() && c != '@');
        if let Some(stem) = fragment_stem(trimmed) {
            if config.keep_fragments {
                words.extend(clean_parts(stem));
            }
            continue;
        }
        for part in clean_parts(bare) {
            if config.drop_fillers && FILLERS.contains(&part.as_str()) {
                continue;
            }
            words.push(part);
        }
    }
    WordSequence(words)
}

/// Whitespace-separated words outside `[...]` groups and `\x15...\x15` bullets.
fn bare_words(raw: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut skip_until: Option<char> = None;
    for (i, c) in raw.char_indices() {
        if let Some(close) = skip_until {
            if c == close {
                skip_until = None;
            }
            continue;
        }
        let opener = match c {
            '[' => Some(']'),
            '\u{15}' => Some('\u{15}'),
            _ => None,
        };
        if c.is_whitespace() || opener.is_some() {
            if let Some(s) = start.take() {
                out.push(&raw[s..i]);
            }
            skip_until = opener;
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let (Some(s), None) = (start, skip_until) {
        out.push(&raw[s..]);
    }
    out
}

fn fragment_stem(word: &str) -> Option<&str> {
    if let Some((stem, marker)) = word.split_once('@') {
        if !stem.is_empty() && !marker.is_empty() {
            return Some(stem);
        }
    }
    crate::chat::is_stranded_letter(word).then_some(word)
}

fn clean_parts(word: &str) -> Vec<String> {
    word.split(['-', '_'])
        .map(|part| {
            let kept: String = part
                .chars()
                .filter(|c| c.is_alphanumeric() || *c == '\'')
                .flat_map(char::to_lowercase)
                .collect();
            kept.trim_matches('\'').to_string()
        })
        .filter(|p| !p.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(raw: &str, config: NormalizationConfig) -> Vec<String> {
        normalize(raw, &config).words().to_vec()
    }

    #[test]
    fn whisper_style_text() {
        assert_eq!(words("Um... Banana.", Default::default()), ["um", "banana"]);
        assert_eq!(
            words(
                "Um... Banana.",
                NormalizationConfig {
                    drop_fillers: true,
                    ..Default::default()
                }
            ),
            ["banana"]
        );
    }

    #[test]
    fn empty_text() {
        assert!(normalize("", &Default::default()).is_empty());
        assert!(normalize("  . ! ", &Default::default()).is_empty());
    }

    #[test]
    fn fragments_toggle() {
        let keep = NormalizationConfig {
            keep_fragments: true,
            ..Default::default()
        };
        assert_eq!(
            words("w [gesture:layering] is right.", Default::default()),
            ["is", "right"]
        );
        assert_eq!(
            words("w [gesture:layering] is right.", keep),
            ["w", "is", "right"]
        );
        assert_eq!(
            words("[gesture:folding] uz@u uh right yes .", keep),
            ["uz", "uh", "right", "yes"]
        );
        assert_eq!(
            words("[gesture:folding] uz@u uh right yes .", Default::default()),
            ["uh", "right", "yes"]
        );
    }

    #[test]
    fn codes_bullets_and_compounds() {
        assert_eq!(
            words(
                "<I want> [/] I want peanut_butter . \u{15}100_200\u{15}",
                Default::default()
            ),
            ["i", "want", "i", "want", "peanut", "butter"]
        );
        assert_eq!(
            words("There's right there.", Default::default()),
            ["there's", "right", "there"]
        );
        assert_eq!(words("I a", Default::default()), ["i", "a"]);
    }

    #[test]
    fn word_sequence_validation() {
        assert!(WordSequence::new(vec!["ok".into()]).is_ok());
        assert!(WordSequence::new(vec!["Ok".into()]).is_err());
        assert!(WordSequence::new(vec!["".into()]).is_err());
        assert!(WordSequence::new(vec!["a b".into()]).is_err());
        assert!(serde_json::from_str::<WordSequence>(r#"["A"]"#).is_err());
    }
}
