//! Prompt templates for the vision and rewriting backends.
//!
//! Templates use `{name}` placeholders; `{{` and `}}` are literal braces.
//! Each template has a fixed set of allowed placeholders, and the user
//! templates have required ones, checked at load time.

use super::{FrameSet, RewriteContext};
use crate::asr_eval::WordSequence;
use crate::event::GestureEvent;
use crate::label::GestureLabel;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template {template}: unknown placeholder {{{name}}}")]
    UnknownPlaceholder { template: String, name: String },
    #[error("template {template}: required placeholder {{{name}}} is missing")]
    MissingPlaceholder { template: String, name: String },
    #[error("template {template}: unbalanced brace at byte {offset}")]
    Malformed { template: String, offset: usize },
    #[error("cannot read template {path}: {message}")]
    Io { path: String, message: String },
}

const GESTURE_VARS: [&str; 4] = ["frame_count", "start_s", "end_s", "candidates"];
const REWRITE_VARS: [&str; 4] = ["transcript", "gestures", "task", "notes"];

const GESTURE_SYSTEM: &str = "You label iconic hand gestures in video frames. \
Reply with a single label and nothing else.";

const GESTURE_USER: &str = "The {frame_count} attached frames were sampled between {start_s} s and {end_s} s of a recorded conversation.
Which iconic hand gesture does the speaker perform? Choose one label from this list:
{candidates}
Reply \"none\" if no listed gesture is visible.";

const REWRITE_SYSTEM: &str =
    "You correct speech recognition transcripts of speakers with aphasia, \
using the hand gestures they produced while speaking.";

const REWRITE_USER: &str = "Speech recognition transcript of one utterance:
{transcript}

Gestures the speaker made during the utterance, in order:
{gestures}

Task: {task}

Rewrite the transcript so that it states what the speaker meant, using the gestures to fill in \
missing or misrecognized words. Keep the speaker's own wording where it is clear. \
Reply with the rewritten utterance only.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptTemplates {
    pub gesture_system: String,
    pub gesture_user: String,
    pub rewrite_system: String,
    pub rewrite_user: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            gesture_system: GESTURE_SYSTEM.to_string(),
            gesture_user: GESTURE_USER.to_string(),
            rewrite_system: REWRITE_SYSTEM.to_string(),
            rewrite_user: REWRITE_USER.to_string(),
        }
    }
}

impl PromptTemplates {
    /// Reads `gesture_system.txt`, `gesture_user.txt`, `rewrite_system.txt`
    /// and `rewrite_user.txt` from `dir`; missing files keep the default.
    pub fn from_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut t = Self::default();
        for (file, slot) in [
            ("gesture_system.txt", &mut t.gesture_system),
            ("gesture_user.txt", &mut t.gesture_user),
            ("rewrite_system.txt", &mut t.rewrite_system),
            ("rewrite_user.txt", &mut t.rewrite_user),
        ] {
            let path = dir.join(file);
            match std::fs::read_to_string(&path) {
                Ok(text) => *slot = text,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => {
                    return Err(TemplateError::Io {
                        path: path.display().to_string(),
                        message: e.to_string(),
                    })
                }
            }
        }
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        let gesture: Vec<(&str, String)> =
            GESTURE_VARS.iter().map(|v| (*v, String::new())).collect();
        let rewrite: Vec<(&str, String)> =
            REWRITE_VARS.iter().map(|v| (*v, String::new())).collect();
        render("gesture_system", &self.gesture_system, &gesture, &[])?;
        render(
            "gesture_user",
            &self.gesture_user,
            &gesture,
            &["candidates"],
        )?;
        render("rewrite_system", &self.rewrite_system, &rewrite, &[])?;
        render(
            "rewrite_user",
            &self.rewrite_user,
            &rewrite,
            &["transcript", "gestures"],
        )?;
        Ok(())
    }

    /// SHA-256 over all four templates, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for part in [
            &self.gesture_system,
            &self.gesture_user,
            &self.rewrite_system,
            &self.rewrite_user,
        ] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }
}

/// A fully rendered request: system text, user text and attached images.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
    pub images: Vec<PathBuf>,
}

impl PromptBundle {
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.system.as_bytes());
        h.update([0u8]);
        h.update(self.user.as_bytes());
        for img in &self.images {
            h.update([0u8]);
            h.update(img.to_string_lossy().as_bytes());
        }
        hex::encode(h.finalize())
    }
}

pub fn build_gesture_prompt(
    templates: &PromptTemplates,
    frames: &FrameSet,
    candidates: &[GestureLabel],
) -> Result<PromptBundle, TemplateError> {
    let seg = frames.segment();
    let list: Vec<String> = candidates.iter().map(|c| format!("- {c}")).collect();
    let vars = [
        ("frame_count", frames.frames().len().to_string()),
        ("start_s", seconds(seg.start_ms())),
        ("end_s", seconds(seg.end_ms())),
        ("candidates", list.join("\n")),
    ];
    Ok(PromptBundle {
        system: render("gesture_system", &templates.gesture_system, &vars, &[])?,
        user: render(
            "gesture_user",
            &templates.gesture_user,
            &vars,
            &["candidates"],
        )?,
        images: frames.frames().iter().map(|f| f.path.clone()).collect(),
    })
}

/// The gesture list has one line per event, so a label repeated in the
/// utterance appears once per occurrence.
pub fn build_rewrite_prompt(
    templates: &PromptTemplates,
    asr_words: &WordSequence,
    gestures: &[GestureEvent],
    context: &RewriteContext,
) -> Result<PromptBundle, TemplateError> {
    let transcript = if asr_words.is_empty() {
        "(no words recognized)".to_string()
    } else {
        asr_words.to_string()
    };
    let gesture_lines = if gestures.is_empty() {
        "(no gestures)".to_string()
    } else {
        let lines: Vec<String> = gestures
            .iter()
            .map(|g| match g.span {
                Some(s) => format!(
                    "- {} ({}-{} s)",
                    g.label,
                    seconds(s.start_ms()),
                    seconds(s.end_ms())
                ),
                None => format!("- {}", g.label),
            })
            .collect();
        lines.join("\n")
    };
    let vars = [
        ("transcript", transcript),
        ("gestures", gesture_lines),
        (
            "task",
            context
                .task
                .clone()
                .unwrap_or_else(|| "not specified".into()),
        ),
        ("notes", context.notes.clone().unwrap_or_default()),
    ];
    Ok(PromptBundle {
        system: render("rewrite_system", &templates.rewrite_system, &vars, &[])?,
        user: render(
            "rewrite_user",
            &templates.rewrite_user,
            &vars,
            &["transcript", "gestures"],
        )?,
        images: Vec::new(),
    })
}

fn seconds(ms: u64) -> String {
    format!("{}.{:03}", ms / 1000, ms % 1000)
}

fn render(
    template: &str,
    text: &str,
    vars: &[(&str, String)],
    required: &[&str],
) -> Result<String, TemplateError> {
    let malformed = |offset| TemplateError::Malformed {
        template: template.to_string(),
        offset,
    };
    let mut out = String::with_capacity(text.len());
    let mut used: Vec<&str> = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut literal_start = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                out.push_str(&text[literal_start..i + 1]);
                i += 2;
                literal_start = i;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                out.push_str(&text[literal_start..i + 1]);
                i += 2;
                literal_start = i;
            }
            b'}' => return Err(malformed(i)),
            b'{' => {
                out.push_str(&text[literal_start..i]);
                let close = text[i..]
                    .find('}')
                    .map(|j| i + j)
                    .ok_or_else(|| malformed(i))?;
                let name = &text[i + 1..close];
                if name.is_empty() || !name.bytes().all(|b| b.is_ascii_lowercase() || b == b'_') {
                    return Err(malformed(i));
                }
                let (key, value) = vars.iter().find(|(k, _)| *k == name).ok_or_else(|| {
                    TemplateError::UnknownPlaceholder {
                        template: template.to_string(),
                        name: name.to_string(),
                    }
                })?;
                out.push_str(value);
                used.push(key);
                i = close + 1;
                literal_start = i;
            }
            _ => i += 1,
        }
    }
    out.push_str(&text[literal_start..]);
    if let Some(missing) = required.iter().find(|r| !used.contains(r)) {
        return Err(TemplateError::MissingPlaceholder {
            template: template.to_string(),
            name: missing.to_string(),
        });
    }
    Ok(out)
}
