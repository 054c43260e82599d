//! Confidence-based pruning of ASR output.
//!
//! A token survives when its confidence is strictly above the threshold
//! (`conf > 0.2` by default); `inclusive` switches to `>=`.

use crate::scalar::Scalar;
use crate::span::TimeSpan;
use serde::{Deserialize, Serialize};

pub const DEFAULT_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TranscriptError {
    #[error("token {index}: text is empty")]
    EmptyText { index: usize },
    #[error("token {index}: confidence {confidence} is outside [0, 1]")]
    Confidence { index: usize, confidence: f64 },
    #[error("token {index}: span starts before the previous token's span")]
    SpanOrder { index: usize },
    #[error("token {index}: {source}")]
    Span {
        index: usize,
        #[source]
        source: crate::span::InvalidSpan,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredToken<C = f64> {
    pub text: String,
    pub confidence: C,
    pub span: Option<TimeSpan>,
}

impl<C: Scalar> ScoredToken<C> {
    pub fn new(text: impl Into<String>, confidence: C) -> Self {
        Self {
            text: text.into(),
            confidence,
            span: None,
        }
    }

    pub fn with_span(mut self, span: TimeSpan) -> Self {
        self.span = Some(span);
        self
    }
}

/// What a previous [`filter_tokens`] call did. `removed` counts tokens
/// dropped relative to the unfiltered backend output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRecord<C = f64> {
    pub threshold: C,
    pub inclusive: bool,
    pub removed: usize,
}

/// ASR output for one audio item.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTranscript<C = f64> {
    pub audio_id: String,
    pub source: String,
    tokens: Vec<ScoredToken<C>>,
    pub filter: Option<FilterRecord<C>>,
}

impl<C: Scalar> ScoredTranscript<C> {
    pub fn new(
        audio_id: impl Into<String>,
        source: impl Into<String>,
        tokens: Vec<ScoredToken<C>>,
    ) -> Result<Self, TranscriptError> {
        validate_tokens(&tokens)?;
        Ok(Self {
            audio_id: audio_id.into(),
            source: source.into(),
            tokens,
            filter: None,
        })
    }

    pub fn tokens(&self) -> &[ScoredToken<C>] {
        &self.tokens
    }

    /// Token texts joined by single spaces.
    pub fn text(&self) -> String {
        let words: Vec<&str> = self.tokens.iter().map(|t| t.text.as_str()).collect();
        words.join(" ")
    }

    pub fn min_confidence(&self) -> Option<C> {
        self.tokens
            .iter()
            .map(|t| t.confidence.clone())
            .reduce(|a, b| if b < a { b } else { a })
    }
}

fn validate_tokens<C: Scalar>(tokens: &[ScoredToken<C>]) -> Result<(), TranscriptError> {
    let mut last_start = None;
    for (index, t) in tokens.iter().enumerate() {
        if t.text.trim().is_empty() {
            return Err(TranscriptError::EmptyText { index });
        }
        if !in_unit_interval(&t.confidence) {
            return Err(TranscriptError::Confidence {
                index,
                confidence: t.confidence.to_f64(),
            });
        }
        if let Some(span) = t.span {
            if last_start.is_some_and(|s| span.start_ms() < s) {
                return Err(TranscriptError::SpanOrder { index });
            }
            last_start = Some(span.start_ms());
        }
    }
    Ok(())
}

fn in_unit_interval<C: Scalar>(v: &C) -> bool {
    *v >= C::zero() && *v <= C::one()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FilterOptions {
    /// Keep tokens whose confidence equals the threshold.
    pub inclusive: bool,
}

/// Keeps the tokens whose confidence clears `threshold`, in order.
pub fn filter_tokens<C: Scalar>(
    transcript: &ScoredTranscript<C>,
    threshold: C,
    options: FilterOptions,
) -> Result<ScoredTranscript<C>, FilterError> {
    if !in_unit_interval(&threshold) {
        return Err(FilterError::InvalidThreshold(threshold.to_f64()));
    }
    let keep = |c: &C| {
        if options.inclusive {
            *c >= threshold
        } else {
            *c > threshold
        }
    };
    let tokens: Vec<ScoredToken<C>> = transcript
        .tokens
        .iter()
        .filter(|t| keep(&t.confidence))
        .cloned()
        .collect();
    let removed_now = transcript.tokens.len() - tokens.len();
    let previously = transcript.filter.as_ref().map_or(0, |r| r.removed);
    Ok(ScoredTranscript {
        audio_id: transcript.audio_id.clone(),
        source: transcript.source.clone(),
        tokens,
        filter: Some(FilterRecord {
            threshold,
            inclusive: options.inclusive,
            removed: previously + removed_now,
        }),
    })
}

// Wire format: {audio_id, source, tokens: [{text, confidence, start_ms?, end_ms?}], filter?}

#[derive(Serialize, Deserialize)]
struct TokenWire<C> {
    text: String,
    confidence: C,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    end_ms: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "C: Serialize", deserialize = "C: Deserialize<'de>"))]
struct TranscriptWire<C> {
    audio_id: String,
    source: String,
    tokens: Vec<TokenWire<C>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    filter: Option<FilterRecord<C>>,
}

impl<C: Scalar + Serialize> Serialize for ScoredTranscript<C> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let wire = TranscriptWire {
            audio_id: self.audio_id.clone(),
            source: self.source.clone(),
            tokens: self
                .tokens
                .iter()
                .map(|t| TokenWire {
                    text: t.text.clone(),
                    confidence: t.confidence.clone(),
                    start_ms: t.span.map(|s| s.start_ms()),
                    end_ms: t.span.map(|s| s.end_ms()),
                })
                .collect(),
            filter: self.filter.clone(),
        };
        wire.serialize(serializer)
    }
}

impl<'de, C: Scalar + Deserialize<'de>> Deserialize<'de> for ScoredTranscript<C> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let wire = TranscriptWire::<C>::deserialize(deserializer)?;
        let mut tokens = Vec::with_capacity(wire.tokens.len());
        for (index, t) in wire.tokens.into_iter().enumerate() {
            let span =
                match (t.start_ms, t.end_ms) {
                    (Some(a), Some(b)) => Some(TimeSpan::new(a, b).map_err(|source| {
                        D::Error::custom(TranscriptError::Span { index, source })
                    })?),
                    (None, None) => None,
                    _ => {
                        return Err(D::Error::custom(format!(
                            "token {index}: start_ms and end_ms must be given together"
                        )))
                    }
                };
            tokens.push(ScoredToken {
                text: t.text,
                confidence: t.confidence,
                span,
            });
        }
        let mut transcript =
            ScoredTranscript::new(wire.audio_id, wire.source, tokens).map_err(D::Error::custom)?;
        transcript.filter = wire.filter;
        Ok(transcript)
    }
}
