use crate::event::GestureEvent;
use crate::span::TimeSpan;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapRule {
    /// Events that overlap no utterance go to the nearest one whose gap is at
    /// most this many milliseconds.
    pub slack_ms: u64,
}

impl Default for OverlapRule {
    fn default() -> Self {
        Self { slack_ms: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceWindow {
    pub id: String,
    pub span: TimeSpan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
}

impl UtteranceWindow {
    pub fn new(id: impl Into<String>, span: TimeSpan) -> Self {
        Self {
            id: id.into(),
            span,
            speaker: None,
        }
    }
}

/// Events bucketed by utterance, in window order. Within a bucket events keep
/// their input order.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Assignment {
    pub buckets: Vec<(String, Vec<GestureEvent>)>,
    pub unassigned: Vec<GestureEvent>,
    /// Overlapping same-speaker windows and out-of-range utterance indices.
    pub diagnostics: Vec<String>,
}

impl Assignment {
    pub fn get(&self, id: &str) -> &[GestureEvent] {
        self.buckets
            .iter()
            .find(|(k, _)| k == id)
            .map(|(_, v)| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn assigned_count(&self) -> usize {
        self.buckets.iter().map(|(_, v)| v.len()).sum()
    }
}

/// Buckets gesture events by utterance.
///
/// A spanned event goes to the window it overlaps most; on equal overlap the
/// earlier window (by start, then by position) wins. An event overlapping
/// nothing goes to the nearest window within `rule.slack_ms`, again earlier
/// first on ties, or to `unassigned`. An event without a span uses its
/// `utterance_index` as a position in `windows`.
pub fn assign_gestures(
    windows: &[UtteranceWindow],
    events: &[GestureEvent],
    rule: OverlapRule,
) -> Assignment {
    let mut out = Assignment {
        buckets: windows.iter().map(|w| (w.id.clone(), Vec::new())).collect(),
        ..Default::default()
    };
    out.diagnostics = overlap_diagnostics(windows);

    // Window positions in (start, position) order, for the earlier-wins rule.
    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.sort_by_key(|&i| (windows[i].span.start_ms(), i));

    for event in events {
        let target = match (event.span, event.utterance_index) {
            (Some(span), _) => pick(windows, &order, &span, rule),
            (None, Some(idx)) if idx < windows.len() => Some(idx),
            (None, Some(idx)) => {
                out.diagnostics.push(format!(
                    "gesture {} refers to utterance {idx}, but there are only {}",
                    event.label,
                    windows.len()
                ));
                None
            }
            (None, None) => None,
        };
        match target {
            Some(i) => out.buckets[i].1.push(event.clone()),
            None => out.unassigned.push(event.clone()),
        }
    }
    out
}

fn pick(
    windows: &[UtteranceWindow],
    order: &[usize],
    span: &TimeSpan,
    rule: OverlapRule,
) -> Option<usize> {
    let mut best: Option<(usize, u64)> = None;
    for &i in order {
        let ov = windows[i].span.overlap_ms(span);
        if ov > 0 && best.is_none_or(|(_, b)| ov > b) {
            best = Some((i, ov));
        }
    }
    if let Some((i, _)) = best {
        return Some(i);
    }
    let mut nearest: Option<(usize, u64)> = None;
    for &i in order {
        let gap = windows[i].span.gap_ms(span);
        if gap <= rule.slack_ms && nearest.is_none_or(|(_, g)| gap < g) {
            nearest = Some((i, gap));
        }
    }
    nearest.map(|(i, _)| i)
}

fn overlap_diagnostics(windows: &[UtteranceWindow]) -> Vec<String> {
    let mut out = Vec::new();
    for (i, a) in windows.iter().enumerate() {
        for b in &windows[i + 1..] {
            if a.speaker == b.speaker && a.span.overlap_ms(&b.span) > 0 {
                out.push(format!(
                    "utterances {} and {} overlap ({} and {})",
                    a.id, b.id, a.span, b.span
                ));
            }
        }
    }
    out
}
