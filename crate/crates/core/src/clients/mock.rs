//! Deterministic offline backends.

use super::{
    AudioRef, ClientError, FrameSet, GestureRecognizer, RewriteContext, RewriteResult, Rewriter,
    SpeechRecognizer,
};
use crate::asr_eval::WordSequence;
use crate::chat::FILLERS;
use crate::event::GestureEvent;
use crate::filter::ScoredTranscript;
use crate::label::GestureLabel;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Returns canned transcripts keyed by audio id. Unknown ids are a backend
/// error, so missing fixtures show up as item failures.
#[derive(Debug, Clone, Default)]
pub struct MockSpeechRecognizer {
    fixtures: BTreeMap<String, ScoredTranscript>,
    failing: BTreeSet<String>,
}

impl MockSpeechRecognizer {
    pub fn new(transcripts: impl IntoIterator<Item = ScoredTranscript>) -> Self {
        Self {
            fixtures: transcripts
                .into_iter()
                .map(|t| (t.audio_id.clone(), t))
                .collect(),
            failing: BTreeSet::new(),
        }
    }

    /// Parses a JSON array of transcripts.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let list: Vec<ScoredTranscript> = serde_json::from_str(text)?;
        Ok(Self::new(list))
    }

    pub fn insert(&mut self, transcript: ScoredTranscript) {
        self.fixtures
            .insert(transcript.audio_id.clone(), transcript);
    }

    /// Makes `id` fail with a 503.
    pub fn fail_on(mut self, id: impl Into<String>) -> Self {
        self.failing.insert(id.into());
        self
    }
}

impl SpeechRecognizer for MockSpeechRecognizer {
    fn id(&self) -> &str {
        "mock-asr"
    }

    fn recognize(&self, audio: &AudioRef) -> Result<ScoredTranscript, ClientError> {
        let id = audio.id();
        if self.failing.contains(&id) {
            return Err(ClientError::Backend {
                status: 503,
                body: format!("injected failure for {id}"),
            });
        }
        let mut t = self
            .fixtures
            .get(&id)
            .cloned()
            .ok_or_else(|| ClientError::Backend {
                status: 404,
                body: format!("no fixture for audio {id}"),
            })?;
        t.source = self.id().to_string();
        Ok(t)
    }
}

/// Returns canned labels keyed by frame-set id; ids without a fixture get no
/// gestures. Labels outside the candidate list become `Other`.
#[derive(Debug, Clone, Default)]
pub struct MockGestureRecognizer {
    fixtures: BTreeMap<String, Vec<GestureLabel>>,
    failing: BTreeSet<String>,
}

impl MockGestureRecognizer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, id: impl Into<String>, labels: Vec<GestureLabel>) -> Self {
        self.fixtures.insert(id.into(), labels);
        self
    }

    /// Parses a JSON object mapping frame-set ids to label lists.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self {
            fixtures: serde_json::from_str(text)?,
            failing: BTreeSet::new(),
        })
    }

    pub fn fail_on(mut self, id: impl Into<String>) -> Self {
        self.failing.insert(id.into());
        self
    }
}

impl GestureRecognizer for MockGestureRecognizer {
    fn id(&self) -> &str {
        "mock-gesture"
    }

    fn recognize(
        &self,
        frames: &FrameSet,
        candidates: &[GestureLabel],
    ) -> Result<Vec<GestureEvent>, ClientError> {
        if self.failing.contains(&frames.id) {
            return Err(ClientError::Backend {
                status: 503,
                body: format!("injected failure for {}", frames.id),
            });
        }
        let labels = self.fixtures.get(&frames.id).cloned().unwrap_or_default();
        Ok(labels
            .into_iter()
            .map(|l| {
                let label = if candidates.contains(&l) {
                    l
                } else {
                    GestureLabel::Other(l.as_str().to_string())
                };
                GestureEvent::detected(label, Some(frames.segment()), None)
            })
            .collect())
    }
}

/// Rule-based rewriter.
///
/// With no gestures the words come back unchanged. Otherwise fillers are
/// removed and each run of fillers becomes a slot for the next gesture
/// (consecutive repeats of a label count once). A gesture slotted right
/// after a subject pronoun is written as a verb ("I cut tomato"), elsewhere
/// as a gerund ("cutting banana"). Gestures left over after the last slot
/// are appended as gerunds.
#[derive(Debug, Clone, Default)]
pub struct MockRewriter {
    failing: BTreeSet<String>,
}

const PRONOUNS: [&str; 4] = ["i", "you", "we", "they"];
const THIRD_PERSON: [&str; 3] = ["he", "she", "it"];

impl MockRewriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails for contexts whose `utterance_id` is `id`.
    pub fn fail_on(mut self, id: impl Into<String>) -> Self {
        self.failing.insert(id.into());
        self
    }
}

impl Rewriter for MockRewriter {
    fn id(&self) -> &str {
        "mock-rewriter"
    }

    fn rewrite(
        &self,
        asr_words: &WordSequence,
        gestures: &[GestureEvent],
        context: &RewriteContext,
    ) -> Result<RewriteResult, ClientError> {
        if let Some(id) = context
            .utterance_id
            .as_ref()
            .filter(|id| self.failing.contains(*id))
        {
            return Err(ClientError::Backend {
                status: 503,
                body: format!("injected failure for {id}"),
            });
        }
        let (final_text, used_gestures) = rule_rewrite(asr_words, gestures);
        Ok(RewriteResult {
            model_raw: final_text.clone(),
            final_text,
            used_gestures,
        })
    }
}

fn rule_rewrite(words: &WordSequence, gestures: &[GestureEvent]) -> (String, Vec<GestureLabel>) {
    if gestures.is_empty() {
        return (words.to_string(), Vec::new());
    }
    let mut labels: Vec<GestureLabel> = Vec::new();
    for g in gestures {
        if labels.last() != Some(&g.label) {
            labels.push(g.label.clone());
        }
    }
    let mut queue: VecDeque<GestureLabel> = labels.iter().cloned().collect();
    let mut out: Vec<String> = Vec::new();
    let mut in_slot = false;
    for w in words.iter() {
        if FILLERS.contains(&w) {
            if !in_slot {
                in_slot = true;
                if let Some(label) = queue.pop_front() {
                    let form = inflect(&label, out.last().map(String::as_str));
                    out.push(form);
                }
            }
            continue;
        }
        in_slot = false;
        out.push(if w == "i" {
            "I".to_string()
        } else {
            w.to_string()
        });
    }
    for label in queue {
        out.push(gerund(&label));
    }
    (out.join(" "), labels)
}

fn inflect(label: &GestureLabel, previous: Option<&str>) -> String {
    match previous.map(str::to_lowercase) {
        Some(p) if PRONOUNS.contains(&p.as_str()) => label.verb().to_string(),
        Some(p) if THIRD_PERSON.contains(&p.as_str()) => format!("{}s", label.verb()),
        _ => gerund(label),
    }
}

fn gerund(label: &GestureLabel) -> String {
    label.as_str().to_string()
}
