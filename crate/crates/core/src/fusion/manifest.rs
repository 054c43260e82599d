use crate::filter::ScoredTranscript;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {message}")]
    Io { path: String, message: String },
    #[error("manifest line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("manifest line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
}

/// ASR output supplied with the manifest: either a path to a transcript
/// JSON file or the transcript itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PrecomputedAsr {
    Path(PathBuf),
    Inline(ScoredTranscript),
}

/// One line of a JSON-lines manifest. Relative paths are resolved against
/// the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestItem {
    pub id: String,
    /// Audio file path or http(s) URL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cha_file: Option<PathBuf>,
    /// Utterance of `cha_file` this item covers (0-based).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precomputed_asr: Option<PrecomputedAsr>,
    /// Reference text shown in case reports when there is no `cha_file`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub items: Vec<ManifestItem>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|e| ManifestError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ManifestError> {
        let mut items = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let item: ManifestItem =
                serde_json::from_str(trimmed).map_err(|e| ManifestError::Schema {
                    line: line_no,
                    message: e.to_string(),
                })?;
            if item.id.is_empty() {
                return Err(ManifestError::Schema {
                    line: line_no,
                    message: "id is empty".into(),
                });
            }
            if item.utterance_index.is_some() && item.cha_file.is_none() {
                return Err(ManifestError::Schema {
                    line: line_no,
                    message: "utterance_index requires cha_file".into(),
                });
            }
            if !seen.insert(item.id.clone()) {
                return Err(ManifestError::DuplicateId {
                    line: line_no,
                    id: item.id,
                });
            }
            items.push(item);
        }
        Ok(Self {
            base_dir: base_dir.into(),
            items,
        })
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}
