use crate::label::GestureLabel;
use crate::span::TimeSpan;
use serde::{Deserialize, Serialize};

/// Where a gesture event came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSource {
    /// Hand annotation in a transcript (`[gesture:...]`).
    Annotation,
    /// A recognition backend.
    Model,
}

/// A detected or annotated iconic gesture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureEvent {
    pub label: GestureLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<TimeSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    pub source: EventSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance_index: Option<usize>,
}

impl GestureEvent {
    pub fn annotated(label: GestureLabel, span: Option<TimeSpan>, utterance_index: usize) -> Self {
        Self {
            label,
            span,
            confidence: None,
            source: EventSource::Annotation,
            utterance_index: Some(utterance_index),
        }
    }

    pub fn detected(label: GestureLabel, span: Option<TimeSpan>, confidence: Option<f64>) -> Self {
        Self {
            label,
            span,
            confidence,
            source: EventSource::Model,
            utterance_index: None,
        }
    }

    /// Checks the confidence range and that `Other` labels are non-empty.
    pub fn is_valid(&self) -> bool {
        let conf_ok = self.confidence.is_none_or(|c| (0.0..=1.0).contains(&c));
        let label_ok = match &self.label {
            GestureLabel::Other(raw) => !raw.is_empty(),
            _ => true,
        };
        conf_ok && label_ok
    }
}
