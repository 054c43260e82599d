//! Word-level alignment and word error rate scoring.

mod align;
mod normalize;

pub use align::{align, Alignment, EditCounts, EditOp, ReconstructError};
pub use normalize::{normalize, InvalidWord, NormalizationConfig, WordSequence};

use crate::scalar::{mean, Scalar};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WerError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("duplicate item id {0:?}")]
    DuplicateId(String),
}

/// What to do when the reference has no words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyReference {
    /// Score against a denominator of one, so the rate is `|hyp|`.
    #[default]
    CountHypothesis,
    /// Refuse with [`WerError::EmptyReference`].
    Strict,
}

/// Error counts from one alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WerScore {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_len: usize,
    pub hyp_len: usize,
}

impl WerScore {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `(S + D + I) / N`, with `N` floored at one for empty references.
    /// Not clipped: insertions can push it above 1.
    pub fn rate<T: Scalar>(&self) -> T {
        T::from_ratio(self.errors() as u64, self.ref_len.max(1) as u64)
    }
}

pub fn wer(
    reference: &WordSequence,
    hypothesis: &WordSequence,
    policy: EmptyReference,
) -> Result<WerScore, WerError> {
    if reference.is_empty() && policy == EmptyReference::Strict {
        return Err(WerError::EmptyReference);
    }
    let counts = align(reference.words(), hypothesis.words()).counts();
    Ok(WerScore {
        substitutions: counts.substitutions,
        deletions: counts.deletions,
        insertions: counts.insertions,
        ref_len: reference.len(),
        hyp_len: hypothesis.len(),
    })
}

/// One reference/hypothesis pair, as read from a JSON-lines manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WerPair {
    pub id: String,
    #[serde(rename = "ref")]
    pub reference: String,
    #[serde(rename = "hyp")]
    pub hypothesis: String,
}

impl WerPair {
    pub fn new(
        id: impl Into<String>,
        reference: impl Into<String>,
        hypothesis: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            reference: reference.into(),
            hypothesis: hypothesis.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemWer<T> {
    pub id: String,
    pub score: WerScore,
    pub wer: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WerReport<T> {
    pub items: Vec<ItemWer<T>>,
    /// Items whose normalized reference was empty.
    pub skipped: Vec<String>,
    /// Mean of the per-item rates.
    pub average_wer: Option<T>,
    /// Total errors over total reference words.
    pub micro_wer: Option<T>,
    pub normalization: NormalizationConfig,
}

/// Scores every pair and macro-averages the per-item rates.
pub fn corpus_wer<T: Scalar>(
    pairs: &[WerPair],
    normalization: &NormalizationConfig,
) -> Result<WerReport<T>, WerError> {
    let mut seen = HashSet::new();
    for p in pairs {
        if !seen.insert(p.id.as_str()) {
            return Err(WerError::DuplicateId(p.id.clone()));
        }
    }

    let scored: Vec<(&str, Option<WerScore>)> = pairs
        .par_iter()
        .map(|p| {
            let reference = normalize(&p.reference, normalization);
            if reference.is_empty() {
                return (p.id.as_str(), None);
            }
            let hypothesis = normalize(&p.hypothesis, normalization);
            let score = wer(&reference, &hypothesis, EmptyReference::Strict)
                .expect("reference checked non-empty");
            (p.id.as_str(), Some(score))
        })
        .collect();

    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for (id, score) in scored {
        match score {
            Some(score) => items.push(ItemWer {
                id: id.to_string(),
                wer: score.rate::<T>(),
                score,
            }),
            None => skipped.push(id.to_string()),
        }
    }

    let average_wer = mean(items.iter().map(|i| i.wer.clone()));
    let total_errors: usize = items.iter().map(|i| i.score.errors()).sum();
    let total_ref: usize = items.iter().map(|i| i.score.ref_len).sum();
    let micro_wer = (total_ref > 0).then(|| T::from_ratio(total_errors as u64, total_ref as u64));
    Ok(WerReport {
        items,
        skipped,
        average_wer,
        micro_wer,
        normalization: *normalization,
    })
}

/// Human-readable per-item table followed by the averages.
pub fn render_wer_table<T: Scalar>(report: &WerReport<T>) -> String {
    let id_width = report
        .items
        .iter()
        .map(|i| i.id.len())
        .chain(std::iter::once(4))
        .max()
        .unwrap_or(4);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<id_width$}  {:>4}  {:>4}  {:>4}  {:>4}  {:>7}",
        "item", "S", "D", "I", "N", "WER"
    );
    for item in &report.items {
        let s = &item.score;
        let _ = writeln!(
            out,
            "{:<id_width$}  {:>4}  {:>4}  {:>4}  {:>4}  {:>7.3}",
            item.id,
            s.substitutions,
            s.deletions,
            s.insertions,
            s.ref_len,
            item.wer.to_f64()
        );
    }
    let fmt = |v: &Option<T>| {
        v.as_ref()
            .map_or("-".to_string(), |v| format!("{:.3}", v.to_f64()))
    };
    let _ = writeln!(out, "average WER (macro): {}", fmt(&report.average_wer));
    let _ = writeln!(out, "global WER (micro):  {}", fmt(&report.micro_wer));
    if !report.skipped.is_empty() {
        let _ = writeln!(
            out,
            "skipped (empty reference): {}",
            report.skipped.join(", ")
        );
    }
    out
}
