//! Per-label gesture statistics over a transcript corpus.
//!
//! Counting rules:
//! * `utterance_count`: utterances containing at least one event of the label;
//! * `user_count`: distinct (file, speaker code) pairs with such an utterance;
//! * durations: one sample per event that has a span, so two gestures in one
//!   utterance contribute two samples. Events without any span are counted
//!   but left out of the duration figures.
//!
//! Durations are accumulated in integer milliseconds and converted once, so
//! rational scalars give exact means.

use crate::chat::{Corpus, Token, TranscriptFile};
use crate::label::GestureLabel;
use crate::scalar::{div_round_half_even, Scalar};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("unknown output format {0:?} (expected table, csv or json)")]
    UnknownFormat(String),
    #[error("cannot encode report: {0}")]
    Encode(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationSummary<T> {
    pub mean_s: T,
    pub min_s: T,
    pub max_s: T,
    /// Number of timed events behind the figures.
    pub samples: usize,
    pub total_ms: u64,
    pub min_ms: u64,
    pub max_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureStatsRow<T> {
    /// `None` on the total row.
    pub label: Option<GestureLabel>,
    pub utterance_count: usize,
    pub user_count: usize,
    pub event_count: usize,
    pub duration: Option<DurationSummary<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport<T> {
    pub rows: Vec<GestureStatsRow<T>>,
    pub total: GestureStatsRow<T>,
    /// Events that had no span and were left out of duration aggregates.
    pub excluded_unspanned: usize,
}

#[derive(Debug, Clone, Default)]
struct Acc {
    utterances: BTreeSet<(String, usize)>,
    users: BTreeSet<(String, String)>,
    events: usize,
    timed: usize,
    total_ms: u64,
    min_ms: Option<u64>,
    max_ms: Option<u64>,
}

impl Acc {
    fn add_event(&mut self, file: &str, utt: usize, speaker: &str, duration_ms: Option<u64>) {
        self.utterances.insert((file.to_string(), utt));
        self.users.insert((file.to_string(), speaker.to_string()));
        self.events += 1;
        if let Some(d) = duration_ms {
            self.timed += 1;
            self.total_ms += d;
            self.min_ms = Some(self.min_ms.map_or(d, |m| m.min(d)));
            self.max_ms = Some(self.max_ms.map_or(d, |m| m.max(d)));
        }
    }

    fn merge(&mut self, other: Acc) {
        self.utterances.extend(other.utterances);
        self.users.extend(other.users);
        self.events += other.events;
        self.timed += other.timed;
        self.total_ms += other.total_ms;
        self.min_ms = [self.min_ms, other.min_ms].into_iter().flatten().min();
        self.max_ms = [self.max_ms, other.max_ms].into_iter().flatten().max();
    }

    fn into_row<T: Scalar>(
        self,
        label: Option<GestureLabel>,
        utterance_count: usize,
    ) -> GestureStatsRow<T> {
        let duration = match (self.min_ms, self.max_ms) {
            (Some(min_ms), Some(max_ms)) if self.timed > 0 => Some(DurationSummary {
                mean_s: T::from_ratio(self.total_ms, 1000 * self.timed as u64),
                min_s: T::from_ratio(min_ms, 1000),
                max_s: T::from_ratio(max_ms, 1000),
                samples: self.timed,
                total_ms: self.total_ms,
                min_ms,
                max_ms,
            }),
            _ => None,
        };
        GestureStatsRow {
            label,
            utterance_count,
            user_count: self.users.len(),
            event_count: self.events,
            duration,
        }
    }
}

fn file_partial(file: &TranscriptFile) -> BTreeMap<GestureLabel, Acc> {
    let mut out: BTreeMap<GestureLabel, Acc> = BTreeMap::new();
    for (idx, utt) in file.utterances.iter().enumerate() {
        for token in &utt.tokens {
            if let Token::Gesture { label, span } = token {
                let duration = span.or(utt.span).map(|s| s.duration_ms());
                out.entry(label.clone()).or_default().add_event(
                    &file.path,
                    idx,
                    &utt.speaker,
                    duration,
                );
            }
        }
    }
    out
}

pub fn compute_stats<T: Scalar>(corpus: &Corpus) -> StatsReport<T> {
    let merged = corpus
        .files
        .par_iter()
        .map(file_partial)
        .reduce(BTreeMap::new, |mut a, b| {
            for (label, acc) in b {
                a.entry(label).or_default().merge(acc);
            }
            a
        });

    let mut total = Acc::default();
    let mut rows = Vec::with_capacity(merged.len());
    let mut utterance_sum = 0;
    for (label, acc) in merged {
        let utterances = acc.utterances.len();
        utterance_sum += utterances;
        total.merge(acc.clone());
        rows.push(acc.into_row(Some(label), utterances));
    }
    let excluded_unspanned = total.events - total.timed;
    StatsReport {
        rows,
        // The total's "# utt" is the column sum, matching the table layout.
        total: total.into_row(None, utterance_sum),
        excluded_unspanned,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsFormat {
    Table,
    Csv,
    Json,
}

impl FromStr for StatsFormat {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(StatsFormat::Table),
            "csv" => Ok(StatsFormat::Csv),
            "json" => Ok(StatsFormat::Json),
            other => Err(StatsError::UnknownFormat(other.to_string())),
        }
    }
}

pub const CSV_HEADER: &str = "label,# utt,# user,mean,min,max";

pub fn render_stats<T: Scalar + Serialize>(
    report: &StatsReport<T>,
    format: &str,
) -> Result<String, StatsError> {
    render(report, format.parse()?)
}

/// `table` rounds durations half-to-even at two decimals; `csv` and `json`
/// carry full precision.
pub fn render<T: Scalar + Serialize>(
    report: &StatsReport<T>,
    format: StatsFormat,
) -> Result<String, StatsError> {
    match format {
        StatsFormat::Table => Ok(render_table(report)),
        StatsFormat::Csv => Ok(render_csv(report)),
        StatsFormat::Json => serde_json::to_string_pretty(report)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| StatsError::Encode(e.to_string())),
    }
}

fn all_rows<T>(report: &StatsReport<T>) -> impl Iterator<Item = &GestureStatsRow<T>> {
    report.rows.iter().chain(std::iter::once(&report.total))
}

fn render_csv<T: Scalar>(report: &StatsReport<T>) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in all_rows(report) {
        let label = row.label.as_ref().map_or("total", |l| l.as_str());
        let (mean, min, max) = match &row.duration {
            Some(d) => (
                d.mean_s.to_f64().to_string(),
                d.min_s.to_f64().to_string(),
                d.max_s.to_f64().to_string(),
            ),
            None => Default::default(),
        };
        let _ = writeln!(
            out,
            "{label},{},{},{mean},{min},{max}",
            row.utterance_count, row.user_count
        );
    }
    out
}

/// `numer_ms / denom` milliseconds as seconds with two decimals, ties to even.
fn centiseconds(numer_ms: u64, denom: u64) -> String {
    let cs = div_round_half_even(u128::from(numer_ms), 10 * u128::from(denom));
    format!("{}.{:02}", cs / 100, cs % 100)
}

fn render_table<T>(report: &StatsReport<T>) -> String {
    let labels: Vec<String> = all_rows(report)
        .map(|r| match &r.label {
            Some(l) => format!("[gesture:{l}]"),
            None => "total".to_string(),
        })
        .collect();
    let width = labels.iter().map(String::len).max().unwrap_or(5).max(5);
    let header = format!(
        "{:<width$}  {:>6}  {:>6}  {:>7}  {:>7}  {:>7}",
        "label", "# utt", "# user", "mean", "min", "max"
    );
    let rule = "-".repeat(header.len());
    let mut out = String::new();
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{rule}");
    for (i, (row, label)) in all_rows(report).zip(&labels).enumerate() {
        if i == report.rows.len() && !report.rows.is_empty() {
            let _ = writeln!(out, "{rule}");
        }
        let (mean, min, max) = match &row.duration {
            Some(d) => (
                centiseconds(d.total_ms, d.samples as u64),
                centiseconds(d.min_ms, 1),
                centiseconds(d.max_ms, 1),
            ),
            None => ("-".into(), "-".into(), "-".into()),
        };
        let _ = writeln!(
            out,
            "{label:<width$}  {:>6}  {:>6}  {mean:>7}  {min:>7}  {max:>7}",
            row.utterance_count, row.user_count
        );
    }
    if report.excluded_unspanned > 0 {
        let _ = writeln!(
            out,
            "({} event(s) without a time span excluded from durations)",
            report.excluded_unspanned
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chat::parse_named;
    use num_rational::Rational64;

    fn corpus(files: &[(&str, &str)]) -> Corpus {
        Corpus {
            files: files
                .iter()
                .map(|(p, s)| parse_named(p, s).unwrap())
                .collect(),
            diagnostics: vec![],
        }
    }

    #[test]
    fn two_point_mean() {
        let c = corpus(&[
            (
                "a.cha",
                "*PAR:\tcut [gesture:cutting] . \u{15}0_1000\u{15}\n",
            ),
            (
                "b.cha",
                "*PAR:\tcut [gesture:cutting] . \u{15}5000_8000\u{15}\n",
            ),
        ]);
        let r = compute_stats::<Rational64>(&c);
        assert_eq!(r.rows.len(), 1);
        let row = &r.rows[0];
        assert_eq!(row.label, Some(GestureLabel::Cutting));
        assert_eq!((row.utterance_count, row.user_count), (2, 2));
        let d = row.duration.as_ref().unwrap();
        assert_eq!(d.mean_s, Rational64::from_integer(2));
        assert_eq!(d.min_s, Rational64::from_integer(1));
        assert_eq!(d.max_s, Rational64::from_integer(3));
    }

    #[test]
    fn empty_corpus() {
        let r = compute_stats::<f64>(&Corpus::default());
        assert!(r.rows.is_empty());
        assert_eq!(r.total.utterance_count, 0);
        assert_eq!(r.total.event_count, 0);
        assert!(r.total.duration.is_none());
    }

    #[test]
    fn utterance_counted_once_events_timed_separately() {
        let c = corpus(&[(
            "a.cha",
            "*PAR:\t[gesture:cutting] \u{15}0_2000\u{15} [gesture:cutting] \u{15}2000_6000\u{15} banana .\n",
        )]);
        let r = compute_stats::<Rational64>(&c);
        let row = &r.rows[0];
        assert_eq!(row.utterance_count, 1);
        assert_eq!(row.event_count, 2);
        assert_eq!(
            row.duration.as_ref().unwrap().mean_s,
            Rational64::from_integer(3)
        );
    }

    #[test]
    fn unspanned_events_are_counted_but_not_timed() {
        let c = corpus(&[(
            "a.cha",
            "*PAR:\t[gesture:eating] .\n*PAR:\t[gesture:eating] . \u{15}0_500\u{15}\n",
        )]);
        let r = compute_stats::<f64>(&c);
        assert_eq!(r.rows[0].utterance_count, 2);
        assert_eq!(r.rows[0].duration.as_ref().unwrap().samples, 1);
        assert_eq!(r.excluded_unspanned, 1);
    }

    #[test]
    fn users_are_file_speaker_pairs() {
        let c = corpus(&[
            ("a.cha", "*PAR:\t[gesture:folding] .\n*INV:\t[gesture:folding] .\n*PAR:\t[gesture:folding] .\n"),
            ("b.cha", "*PAR:\t[gesture:folding] .\n"),
        ]);
        let r = compute_stats::<f64>(&c);
        assert_eq!(r.rows[0].utterance_count, 4);
        assert_eq!(r.rows[0].user_count, 3);
    }

    #[test]
    fn formats() {
        let c = corpus(&[("a.cha", "*PAR:\t[gesture:spreading] . \u{15}0_2005\u{15}\n")]);
        let r = compute_stats::<f64>(&c);
        let csv = render_stats(&r, "csv").unwrap();
        assert_eq!(csv.lines().next(), Some(CSV_HEADER));
        assert_eq!(csv.lines().nth(1), Some("spreading,1,1,2.005,2.005,2.005"));
        let table = render_stats(&r, "table").unwrap();
        // 2.005 s: exactly half a centisecond above 2.00, ties to even.
        assert!(table.contains("   2.00"), "{table}");
        let json = render_stats(&r, "json").unwrap();
        assert_eq!(serde_json::from_str::<StatsReport<f64>>(&json).unwrap(), r);
        assert_eq!(
            render_stats(&r, "xml"),
            Err(StatsError::UnknownFormat("xml".into()))
        );
    }

    #[test]
    fn centisecond_rounding() {
        assert_eq!(centiseconds(2015, 1), "2.02");
        assert_eq!(centiseconds(2025, 1), "2.02");
        assert_eq!(centiseconds(2026, 1), "2.03");
        assert_eq!(centiseconds(10000, 3), "3.33");
        assert_eq!(centiseconds(90, 1), "0.09");
    }
}
