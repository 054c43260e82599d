use super::{
    assign_gestures, fuse_utterance, EnrichedUtterance, FusionInput, Manifest, ManifestItem,
    OverlapRule, PrecomputedAsr, Provenance, UtteranceWindow,
};
use crate::asr_eval::{normalize, NormalizationConfig};
use crate::chat::{extract_gesture_events, parse_bytes, TranscriptFile};
use crate::clients::{
    default_candidates, AudioFormat, AudioRef, FrameSet, GestureRecognizer, RewriteContext,
    Rewriter, SpeechRecognizer, DEFAULT_FRAME_COUNT,
};
use crate::event::GestureEvent;
use crate::filter::{filter_tokens, FilterOptions, ScoredTranscript, DEFAULT_THRESHOLD};
use crate::label::GestureLabel;
use crate::span::TimeSpan;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GestureMode {
    /// Annotations when the item has a transcript file, else the gesture
    /// backend when it has frames, else nothing.
    #[default]
    Auto,
    Annotations,
    Model,
    Off,
}

impl std::str::FromStr for GestureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self::Auto),
            "annotations" => Ok(Self::Annotations),
            "model" => Ok(Self::Model),
            "off" => Ok(Self::Off),
            other => Err(format!("unknown gesture mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub threshold: f64,
    pub inclusive: bool,
    pub apply_filter: bool,
    pub gesture_mode: GestureMode,
    pub candidates: Vec<GestureLabel>,
    pub frame_count: usize,
    pub overlap: OverlapRule,
    pub normalization: NormalizationConfig,
    pub parallel: usize,
    pub prompts_hash: String,
    pub task: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            inclusive: false,
            apply_filter: true,
            gesture_mode: GestureMode::Auto,
            candidates: default_candidates(),
            frame_count: DEFAULT_FRAME_COUNT,
            overlap: OverlapRule::default(),
            normalization: NormalizationConfig::default(),
            parallel: 1,
            prompts_hash: String::new(),
            task: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(PipelineError::Config(format!(
                "threshold {} is outside [0, 1]",
                self.threshold
            )));
        }
        if self.parallel == 0 {
            return Err(PipelineError::Config("parallel must be at least 1".into()));
        }
        if self.frame_count == 0 {
            return Err(PipelineError::Config(
                "frame_count must be at least 1".into(),
            ));
        }
        if self.candidates.is_empty() {
            return Err(PipelineError::Config(
                "candidate label list is empty".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("cannot start worker pool: {0}")]
    ThreadPool(String),
}

/// Stage clients, shared across worker threads.
#[derive(Clone)]
pub struct Backends {
    pub asr: Option<Arc<dyn SpeechRecognizer>>,
    pub gesture: Option<Arc<dyn GestureRecognizer>>,
    pub rewriter: Arc<dyn Rewriter>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Asr,
    Filter,
    Gesture,
    Assign,
    Rewrite,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Asr => "asr",
            Stage::Filter => "filter",
            Stage::Gesture => "gesture",
            Stage::Assign => "assign",
            Stage::Rewrite => "rewrite",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageFailure {
    pub utterance_id: String,
    pub stage: Stage,
    pub error: String,
}

/// Wall time spent in each stage, summed over items, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub asr_s: f64,
    pub filter_s: f64,
    pub gesture_s: f64,
    pub assign_s: f64,
    pub rewrite_s: f64,
}

impl StageTimings {
    fn add(&mut self, stage: Stage, d: Duration) {
        let slot = match stage {
            Stage::Asr => &mut self.asr_s,
            Stage::Filter => &mut self.filter_s,
            Stage::Gesture => &mut self.gesture_s,
            Stage::Assign => &mut self.assign_s,
            Stage::Rewrite => &mut self.rewrite_s,
        };
        *slot += d.as_secs_f64();
    }

    fn merge(&mut self, other: &StageTimings) {
        self.asr_s += other.asr_s;
        self.filter_s += other.filter_s;
        self.gesture_s += other.gesture_s;
        self.assign_s += other.assign_s;
        self.rewrite_s += other.rewrite_s;
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineReport {
    pub utterances: Vec<EnrichedUtterance>,
    pub failures: Vec<StageFailure>,
    pub timing: StageTimings,
    /// Set when the run was cancelled; unfinished items are listed as
    /// failures.
    #[serde(default)]
    pub incomplete: bool,
}

impl PipelineReport {
    pub fn item_count(&self) -> usize {
        self.utterances.len() + self.failures.len()
    }

    /// The report with timing zeroed, for comparing runs.
    pub fn without_timing(&self) -> PipelineReport {
        PipelineReport {
            timing: StageTimings::default(),
            ..self.clone()
        }
    }
}

/// Runs every manifest item through ASR, filtering, gesture recognition,
/// assignment and rewriting on a pool of `config.parallel` threads.
///
/// Per-item errors are recorded with the stage that failed; the batch always
/// runs to completion unless `cancel` is raised, in which case the remaining
/// items are recorded as cancelled and the report is marked incomplete.
/// Results keep manifest order.
pub fn run_pipeline(
    manifest: &Manifest,
    backends: &Backends,
    config: &PipelineConfig,
    cancel: Option<&AtomicBool>,
) -> Result<PipelineReport, PipelineError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallel)
        .build()
        .map_err(|e| PipelineError::ThreadPool(e.to_string()))?;
    let results: Vec<(Result<EnrichedUtterance, StageFailure>, StageTimings)> =
        pool.install(|| {
            manifest
                .items
                .par_iter()
                .map(|item| {
                    let mut run = ItemRun {
                        manifest,
                        item,
                        backends,
                        config,
                        cancel,
                        timing: StageTimings::default(),
                    };
                    let result = run.process();
                    (result, run.timing)
                })
                .collect()
        });

    let mut report = PipelineReport::default();
    for (result, timing) in results {
        report.timing.merge(&timing);
        match result {
            Ok(u) => report.utterances.push(u),
            Err(f) => report.failures.push(f),
        }
    }
    report.incomplete = cancel.is_some_and(|c| c.load(Ordering::SeqCst));
    Ok(report)
}

struct ItemRun<'a> {
    manifest: &'a Manifest,
    item: &'a ManifestItem,
    backends: &'a Backends,
    config: &'a PipelineConfig,
    cancel: Option<&'a AtomicBool>,
    timing: StageTimings,
}

impl ItemRun<'_> {
    fn fail(&self, stage: Stage, error: impl ToString) -> StageFailure {
        StageFailure {
            utterance_id: self.item.id.clone(),
            stage,
            error: error.to_string(),
        }
    }

    fn stage<T>(
        &mut self,
        stage: Stage,
        f: impl FnOnce(&Self) -> Result<T, String>,
    ) -> Result<T, StageFailure> {
        if self.cancel.is_some_and(|c| c.load(Ordering::SeqCst)) {
            return Err(self.fail(stage, "cancelled"));
        }
        let start = Instant::now();
        let out = f(self);
        self.timing.add(stage, start.elapsed());
        out.map_err(|e| self.fail(stage, e))
    }

    fn process(&mut self) -> Result<EnrichedUtterance, StageFailure> {
        let (transcript, asr_backend) = self.stage(Stage::Asr, |r| r.recognize())?;

        let (filtered, threshold) = self.stage(Stage::Filter, |r| {
            if !r.config.apply_filter {
                return Ok((transcript.clone(), None));
            }
            let opts = FilterOptions {
                inclusive: r.config.inclusive,
            };
            filter_tokens(&transcript, r.config.threshold, opts)
                .map(|t| (t, Some(r.config.threshold)))
                .map_err(|e| e.to_string())
        })?;

        let gestures = self.stage(Stage::Gesture, |r| r.gestures(&transcript))?;

        let (assigned, unassigned) = self.stage(Stage::Assign, |r| {
            Ok(match gestures.window {
                Some(span) => {
                    let window = UtteranceWindow::new(r.item.id.clone(), span);
                    let a = assign_gestures(&[window], &gestures.events, r.config.overlap);
                    for d in &a.diagnostics {
                        log::warn!("{}: {d}", r.item.id);
                    }
                    let unassigned = a.unassigned.len();
                    (
                        a.buckets
                            .into_iter()
                            .next()
                            .map(|(_, v)| v)
                            .unwrap_or_default(),
                        unassigned,
                    )
                }
                None => (gestures.events.clone(), 0),
            })
        })?;

        let provenance = Provenance {
            asr_backend,
            gesture_source: gestures.source.clone(),
            rewriter: String::new(),
            threshold,
            inclusive: self.config.inclusive,
            removed_tokens: filtered.filter.as_ref().map_or(0, |f| f.removed),
            min_retained_confidence: filtered.min_confidence(),
            prompts_hash: self.config.prompts_hash.clone(),
        };
        let input = FusionInput {
            utterance_id: self.item.id.clone(),
            original: gestures
                .original
                .clone()
                .or_else(|| self.item.reference.clone()),
            asr_raw: transcript.text(),
            asr_words: normalize(&filtered.text(), &self.config.normalization),
            gestures: assigned,
            unassigned_gestures: unassigned,
            context: RewriteContext {
                utterance_id: Some(self.item.id.clone()),
                task: self.config.task.clone(),
                notes: None,
            },
            provenance,
        };
        let rewriter = self.backends.rewriter.clone();
        self.stage(Stage::Rewrite, |_| {
            fuse_utterance(input, rewriter.as_ref()).map_err(|e| e.to_string())
        })
    }

    fn recognize(&self) -> Result<(ScoredTranscript, String), String> {
        if let Some(pre) = &self.item.precomputed_asr {
            let t = match pre {
                PrecomputedAsr::Inline(t) => t.clone(),
                PrecomputedAsr::Path(p) => {
                    let path = self.manifest.resolve(p);
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| format!("{}: {e}", path.display()))?;
                    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
                }
            };
            let source = format!("precomputed:{}", t.source);
            return Ok((t, source));
        }
        let Some(audio) = &self.item.audio else {
            let empty = ScoredTranscript::new(self.item.id.clone(), "none", Vec::new())
                .expect("empty transcript is valid");
            return Ok((empty, "none".into()));
        };
        let asr = self
            .backends
            .asr
            .as_ref()
            .ok_or("no speech recognizer configured")?;
        let audio = audio_ref(self.manifest, audio)?;
        let t = asr.recognize(&audio).map_err(|e| e.to_string())?;
        Ok((t, asr.id().to_string()))
    }

    fn gestures(&self, transcript: &ScoredTranscript) -> Result<ItemGestures, String> {
        let file = match &self.item.cha_file {
            Some(p) => Some(load_cha(&self.manifest.resolve(p))?),
            None => None,
        };
        let utterance = match (&file, self.item.utterance_index) {
            (Some(f), Some(idx)) => Some(f.utterances.get(idx).ok_or_else(|| {
                format!(
                    "{} has {} utterances, index {idx} is out of range",
                    f.path,
                    f.utterances.len()
                )
            })?),
            _ => None,
        };
        let window = utterance
            .and_then(|u| u.span)
            .or_else(|| token_range(transcript));
        let mut out = ItemGestures {
            events: Vec::new(),
            source: "none".into(),
            window,
            original: utterance.map(|u| u.text()),
        };

        let use_annotations = match self.config.gesture_mode {
            GestureMode::Auto | GestureMode::Annotations => file.is_some(),
            _ => false,
        };
        let use_model = match self.config.gesture_mode {
            GestureMode::Auto => file.is_none() && self.item.frames_dir.is_some(),
            GestureMode::Model => self.item.frames_dir.is_some(),
            _ => false,
        };

        if use_annotations {
            let file = file.as_ref().expect("checked above");
            out.events = extract_gesture_events(file)
                .into_iter()
                .filter(|e| {
                    self.item
                        .utterance_index
                        .is_none_or(|i| e.utterance_index == Some(i))
                })
                .map(|mut e| {
                    // The item is a single window; spanless events belong to it.
                    e.utterance_index = Some(0);
                    e
                })
                .collect();
            out.source = "annotation".into();
        } else if use_model {
            let rec = self
                .backends
                .gesture
                .as_ref()
                .ok_or("no gesture recognizer configured")?;
            let dir = self
                .manifest
                .resolve(self.item.frames_dir.as_ref().expect("checked above"));
            let frames =
                FrameSet::from_dir(self.item.id.clone(), &dir, window, self.config.frame_count)
                    .map_err(|e| e.to_string())?;
            out.window = out.window.or(Some(frames.segment()));
            out.events = rec
                .recognize(&frames, &self.config.candidates)
                .map_err(|e| e.to_string())?;
            if let Some(bad) = out.events.iter().find(|e| !e.is_valid()) {
                return Err(format!("backend returned an invalid event: {bad:?}"));
            }
            out.source = rec.id().to_string();
        }
        Ok(out)
    }
}

struct ItemGestures {
    events: Vec<GestureEvent>,
    source: String,
    window: Option<TimeSpan>,
    original: Option<String>,
}

fn load_cha(path: &Path) -> Result<TranscriptFile, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_bytes(&path.display().to_string(), &bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn audio_ref(manifest: &Manifest, audio: &str) -> Result<AudioRef, String> {
    if audio.starts_with("http://") || audio.starts_with("https://") {
        let path_part = audio.split(['?', '#']).next().unwrap_or(audio);
        let format = Path::new(path_part)
            .extension()
            .and_then(|e| e.to_str())
            .and_then(AudioFormat::from_extension)
            .ok_or_else(|| format!("cannot tell the audio format of {audio}"))?;
        Ok(AudioRef::from_url(audio, format))
    } else {
        AudioRef::from_path(manifest.resolve(Path::new(audio))).map_err(|e| e.to_string())
    }
}

/// From the first token start to the last token end, when tokens are timed.
fn token_range(t: &ScoredTranscript) -> Option<TimeSpan> {
    let start = t.tokens().iter().find_map(|tok| tok.span)?.start_ms();
    let end = t.tokens().iter().rev().find_map(|tok| tok.span)?.end_ms();
    TimeSpan::new(start, end).ok()
}
