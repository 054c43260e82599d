//! Backend interfaces for the three pipeline stages (speech recognition,
//! gesture recognition, contextual rewriting), with deterministic mocks and
//! HTTP implementations.

mod frames;
pub mod http;
mod labels;
pub mod mock;
pub mod prompts;

pub use frames::{sample_evenly, Frame, FrameSet, FrameSetError, DEFAULT_FRAME_COUNT};
pub use labels::{parse_gesture_reply, UnmatchedLabel};
pub use prompts::{
    build_gesture_prompt, build_rewrite_prompt, PromptBundle, PromptTemplates, TemplateError,
};

use crate::asr_eval::WordSequence;
use crate::event::GestureEvent;
use crate::filter::ScoredTranscript;
use crate::label::GestureLabel;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend returned status {status}: {body}")]
    Backend { status: u16, body: String },
    #[error("cannot decode backend response: {0}")]
    Decode(String),
    #[error("reply does not name a candidate gesture: {0:?}")]
    UnparseableLabel(String),
    #[error("backend returned an empty response")]
    EmptyResponse,
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("invalid request: {0}")]
    InvalidInput(String),
    #[error("request cancelled")]
    Cancelled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AudioFormat {
    Wav,
    Mp3,
    Flac,
}

impl AudioFormat {
    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "wav" => Some(AudioFormat::Wav),
            "mp3" => Some(AudioFormat::Mp3),
            "flac" => Some(AudioFormat::Flac),
            _ => None,
        }
    }

    pub fn mime(&self) -> &'static str {
        match self {
            AudioFormat::Wav => "audio/wav",
            AudioFormat::Mp3 => "audio/mpeg",
            AudioFormat::Flac => "audio/flac",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioLocation {
    Path(PathBuf),
    Url(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioRef {
    pub location: AudioLocation,
    pub format: AudioFormat,
    pub duration_ms: Option<u64>,
}

impl AudioRef {
    /// Audio file on disk; the format comes from the extension.
    pub fn from_path(path: impl Into<PathBuf>) -> Result<Self, ClientError> {
        let path = path.into();
        let format = path
            .extension()
            .and_then(|e| e.to_str())
            .and_then(AudioFormat::from_extension)
            .ok_or_else(|| {
                ClientError::InvalidInput(format!("unsupported audio file {}", path.display()))
            })?;
        Ok(Self {
            location: AudioLocation::Path(path),
            format,
            duration_ms: None,
        })
    }

    pub fn from_url(url: impl Into<String>, format: AudioFormat) -> Self {
        Self {
            location: AudioLocation::Url(url.into()),
            format,
            duration_ms: None,
        }
    }

    /// File stem of the path or of the last URL segment.
    pub fn id(&self) -> String {
        let last = match &self.location {
            AudioLocation::Path(p) => p.file_name().map(|n| n.to_string_lossy().into_owned()),
            AudioLocation::Url(u) => u
                .split(['?', '#'])
                .next()
                .and_then(|u| u.rsplit('/').next())
                .map(str::to_string),
        }
        .unwrap_or_default();
        Path::new(&last)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or(last)
    }
}

/// Extra information handed to the rewriter.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RewriteContext {
    pub utterance_id: Option<String>,
    /// Elicitation task, e.g. "Peanut Butter Sandwich Task".
    pub task: Option<String>,
    pub notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteResult {
    pub final_text: String,
    pub model_raw: String,
    pub used_gestures: Vec<GestureLabel>,
}

pub trait SpeechRecognizer: Send + Sync {
    fn id(&self) -> &str;
    fn recognize(&self, audio: &AudioRef) -> Result<ScoredTranscript, ClientError>;
}

pub trait GestureRecognizer: Send + Sync {
    fn id(&self) -> &str;

    /// Every returned label is one of `candidates` or `Other`; events carry
    /// the frame set's segment span.
    fn recognize(
        &self,
        frames: &FrameSet,
        candidates: &[GestureLabel],
    ) -> Result<Vec<GestureEvent>, ClientError>;
}

pub trait Rewriter: Send + Sync {
    fn id(&self) -> &str;
    fn rewrite(
        &self,
        asr_words: &WordSequence,
        gestures: &[GestureEvent],
        context: &RewriteContext,
    ) -> Result<RewriteResult, ClientError>;
}

/// The six named labels, used when no candidate list is configured.
pub fn default_candidates() -> Vec<GestureLabel> {
    GestureLabel::NAMED.to_vec()
}
