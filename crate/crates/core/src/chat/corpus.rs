use super::{parse_bytes, ParseError, TranscriptFile};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// A set of parsed transcripts plus the files that failed to parse.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub files: Vec<TranscriptFile>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct CorpusOptions {
    /// File extension without the leading dot.
    pub extension: String,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self {
            extension: "cha".to_string(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus root {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub fn parse_corpus(root: &Path) -> Result<Corpus, CorpusError> {
    parse_corpus_with(root, &CorpusOptions::default())
}

/// Recursively parses every matching file under `root`.
///
/// Files are visited in lexicographic order of their path relative to `root`
/// and parsed in parallel. A file that fails to read or parse becomes a
/// diagnostic; only an unreadable root is an error.
pub fn parse_corpus_with(root: &Path, opts: &CorpusOptions) -> Result<Corpus, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: root.to_path_buf(),
        source,
    };
    std::fs::read_dir(root).map_err(io_err)?;

    let mut paths = Vec::new();
    let mut diagnostics = Vec::new();
    for entry in walkdir::WalkDir::new(root).follow_links(true) {
        match entry {
            Ok(e) if e.file_type().is_file() => {
                if e.path().extension().and_then(|x| x.to_str()) == Some(opts.extension.as_str()) {
                    paths.push(e.into_path());
                }
            }
            Ok(_) => {}
            Err(e) => diagnostics.push(Diagnostic {
                path: e.path().map(|p| relative(root, p)).unwrap_or_default(),
                message: e.to_string(),
            }),
        }
    }
    paths.sort_by_key(|p| relative(root, p));

    let results: Vec<(String, Result<TranscriptFile, String>)> = paths
        .par_iter()
        .map(|p| {
            let rel = relative(root, p);
            let parsed = std::fs::read(p)
                .map_err(|e| e.to_string())
                .and_then(|bytes| parse_bytes(&rel, &bytes).map_err(|e: ParseError| e.to_string()));
            (rel, parsed)
        })
        .collect();

    let mut files = Vec::new();
    for (path, result) in results {
        match result {
            Ok(f) => files.push(f),
            Err(message) => diagnostics.push(Diagnostic { path, message }),
        }
    }
    Ok(Corpus { files, diagnostics })
}

fn relative(root: &Path, p: &Path) -> String {
    let rel = p.strip_prefix(root).unwrap_or(p);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}
