//! Gesture/utterance alignment and the end-to-end enrichment pipeline.

mod assign;
mod manifest;
mod pipeline;

pub use assign::{assign_gestures, Assignment, OverlapRule, UtteranceWindow};
pub use manifest::{Manifest, ManifestError, ManifestItem, PrecomputedAsr};
pub use pipeline::{
    run_pipeline, Backends, GestureMode, PipelineConfig, PipelineError, PipelineReport, Stage,
    StageFailure, StageTimings,
};

use crate::asr_eval::WordSequence;
use crate::clients::{ClientError, RewriteContext, Rewriter};
use crate::event::GestureEvent;
use serde::{Deserialize, Serialize};

/// Which backends and settings produced an utterance.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub asr_backend: String,
    /// `annotation`, a gesture backend id, or `none`.
    pub gesture_source: String,
    pub rewriter: String,
    /// Filter threshold, absent when filtering was off.
    pub threshold: Option<f64>,
    pub inclusive: bool,
    pub removed_tokens: usize,
    /// Lowest confidence among the tokens the rewriter saw.
    pub min_retained_confidence: Option<f64>,
    pub prompts_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedUtterance {
    pub utterance_id: String,
    /// Hand transcript of the utterance, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original: Option<String>,
    /// ASR text before filtering.
    pub asr_raw: String,
    /// Normalized ASR words after filtering; this is what the rewriter saw.
    pub asr_words: WordSequence,
    pub gestures: Vec<GestureEvent>,
    pub final_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_raw: Option<String>,
    /// Set when there were neither words nor gestures and the rewriter was
    /// not called.
    #[serde(default)]
    pub skipped: bool,
    #[serde(default)]
    pub unassigned_gestures: usize,
    pub provenance: Provenance,
}

/// Everything about one utterance except the rewrite.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FusionInput {
    pub utterance_id: String,
    pub original: Option<String>,
    pub asr_raw: String,
    pub asr_words: WordSequence,
    pub gestures: Vec<GestureEvent>,
    pub unassigned_gestures: usize,
    pub context: RewriteContext,
    pub provenance: Provenance,
}

/// Calls the rewriter once, or not at all when the utterance has neither
/// words nor gestures.
pub fn fuse_utterance(
    input: FusionInput,
    rewriter: &dyn Rewriter,
) -> Result<EnrichedUtterance, ClientError> {
    let mut provenance = input.provenance;
    provenance.rewriter = rewriter.id().to_string();
    let (final_text, model_raw, skipped) =
        if input.gestures.is_empty() && input.asr_words.is_empty() {
            (String::new(), None, true)
        } else {
            let result = rewriter.rewrite(&input.asr_words, &input.gestures, &input.context)?;
            if result.final_text.trim().is_empty() {
                return Err(ClientError::EmptyResponse);
            }
            (result.final_text, Some(result.model_raw), false)
        };
    Ok(EnrichedUtterance {
        utterance_id: input.utterance_id,
        original: input.original,
        asr_raw: input.asr_raw,
        asr_words: input.asr_words,
        gestures: input.gestures,
        final_text,
        model_raw,
        skipped,
        unassigned_gestures: input.unassigned_gestures,
        provenance,
    })
}

/// Three-column comparison: hand transcript, ASR output, enriched output.
pub fn render_case_report(utterances: &[EnrichedUtterance]) -> String {
    let rows: Vec<[String; 4]> = utterances
        .iter()
        .map(|u| {
            [
                u.utterance_id.clone(),
                u.original.clone().unwrap_or_default(),
                u.asr_raw.clone(),
                u.final_text.clone(),
            ]
        })
        .collect();
    let header = ["Index", "Original", "ASR", "Ours"];
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[&str]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join(" | ").trim_end().to_string()
    };
    let mut out = line(&header);
    out.push('\n');
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&rule.join("-+-"));
    out.push('\n');
    for r in &rows {
        let cells: Vec<&str> = r.iter().map(String::as_str).collect();
        out.push_str(&line(&cells));
        out.push('\n');
    }
    out
}
