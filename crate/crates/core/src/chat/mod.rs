//! Reader and writer for a subset of the CHAT transcript format.
//!
//! Supported constructs:
//!
//! * header lines, `@Key:\tvalue` or bare `@Key`, kept verbatim and in order;
//! * main tiers `*CODE:\t<tokens> [terminator] [\x15start_end\x15]`;
//! * dependent tiers (`%mor:` etc.), attached opaquely to the preceding utterance;
//! * `[gesture:<label>]` groups (`[gesture::<label>]` is accepted and written
//!   back with a single colon), optionally followed by their own time bullet;
//! * `word@x` special forms and stranded single letters as fragments;
//! * a fixed filler lexicon, terminal punctuation and opaque bracketed codes
//!   such as `[/]` or `[//]`.
//!
//! Continuation lines (starting with a tab) are folded into the previous line.

mod corpus;
mod parser;
mod writer;

pub use corpus::{parse_corpus, parse_corpus_with, Corpus, CorpusError, CorpusOptions, Diagnostic};
pub(crate) use parser::is_stranded_letter;
pub use parser::{parse_bytes, parse_file, parse_named};
pub use writer::serialize;

use crate::event::GestureEvent;
use crate::label::GestureLabel;
use crate::span::TimeSpan;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

pub const FILLERS: [&str; 5] = ["um", "uh", "er", "eh", "mm"];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("input is not valid UTF-8 (at byte {valid_up_to})")]
    Encoding { valid_up_to: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptFile {
    pub path: String,
    pub headers: Vec<Header>,
    pub participants: Vec<ParticipantInfo>,
    pub utterances: Vec<Utterance>,
}

/// A header line, stored verbatim. `position` is the number of utterances
/// that precede it in the file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub key: String,
    pub value: Option<String>,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantInfo {
    pub code: String,
    pub role: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub demographics: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: String,
    pub tokens: Vec<Token>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<TimeSpan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dependent_tiers: Vec<DependentTier>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependentTier {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Token {
    Word {
        text: String,
    },
    Filler {
        text: String,
    },
    /// `text` is the literal source form, e.g. `uz@u`; `marker` is the part
    /// after `@`, absent for stranded letters.
    Fragment {
        text: String,
        marker: Option<String>,
    },
    Gesture {
        label: GestureLabel,
        span: Option<TimeSpan>,
    },
    Punct {
        text: String,
    },
    /// Any other bracketed code or scope marker, kept verbatim.
    Code {
        text: String,
    },
}

impl Token {
    pub fn word(text: impl Into<String>) -> Token {
        Token::Word { text: text.into() }
    }

    pub fn filler(text: impl Into<String>) -> Token {
        Token::Filler { text: text.into() }
    }

    pub fn punct(text: impl Into<String>) -> Token {
        Token::Punct { text: text.into() }
    }

    pub fn gesture(label: GestureLabel) -> Token {
        Token::Gesture { label, span: None }
    }

    pub fn is_gesture(&self) -> bool {
        matches!(self, Token::Gesture { .. })
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Word { text }
            | Token::Filler { text }
            | Token::Fragment { text, .. }
            | Token::Punct { text }
            | Token::Code { text } => f.write_str(text),
            Token::Gesture { label, span } => {
                write!(f, "[gesture:{label}]")?;
                if let Some(span) = span {
                    write!(f, " \u{15}{span}\u{15}")?;
                }
                Ok(())
            }
        }
    }
}

impl Utterance {
    /// Main-tier body without speaker prefix or utterance bullet.
    pub fn text(&self) -> String {
        let parts: Vec<String> = self.tokens.iter().map(Token::to_string).collect();
        parts.join(" ")
    }

    pub fn gesture_labels(&self) -> impl Iterator<Item = &GestureLabel> {
        self.tokens.iter().filter_map(|t| match t {
            Token::Gesture { label, .. } => Some(label),
            _ => None,
        })
    }
}

impl TranscriptFile {
    pub fn participant(&self, code: &str) -> Option<&ParticipantInfo> {
        self.participants.iter().find(|p| p.code == code)
    }
}

/// One event per gesture annotation, in document order.
///
/// An event takes the annotation's own span when it has one, otherwise the
/// enclosing utterance's span.
pub fn extract_gesture_events(file: &TranscriptFile) -> Vec<GestureEvent> {
    file.utterances
        .iter()
        .enumerate()
        .flat_map(|(idx, utt)| {
            utt.tokens.iter().filter_map(move |t| match t {
                Token::Gesture { label, span } => Some(GestureEvent::annotated(
                    label.clone(),
                    span.or(utt.span),
                    idx,
                )),
                _ => None,
            })
        })
        .collect()
}

pub(crate) fn is_valid_speaker_code(code: &str) -> bool {
    !code.is_empty() && code.bytes().all(|b| b.is_ascii_uppercase())
}
