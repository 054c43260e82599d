use crate::config::CliConfig;
use crate::{backends, Command, GlobalArgs};
use anyhow::{bail, Context, Result};
use gesture_asr::asr_eval::{corpus_wer, normalize, render_wer_table, WerPair};
use gesture_asr::chat::{
    self, extract_gesture_events, parse_bytes, parse_corpus_with, CorpusOptions,
};
use gesture_asr::clients::{FrameSet, RewriteContext};
use gesture_asr::event::GestureEvent;
use gesture_asr::filter::{filter_tokens, FilterOptions, ScoredTranscript};
use gesture_asr::fusion::{
    fuse_utterance, render_case_report, run_pipeline, Backends, FusionInput, Manifest,
    PipelineReport, Provenance,
};
use gesture_asr::label::GestureLabel;
use gesture_asr::span::TimeSpan;
use gesture_asr::stats::{compute_stats, render, StatsFormat};
use gesture_asr::WerReport64;
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    ItemFailures,
}

impl Outcome {
    fn from_failures(any: bool) -> Self {
        if any {
            Outcome::ItemFailures
        } else {
            Outcome::Success
        }
    }
}

/// One row of `case-report --json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub index: String,
    pub original: String,
    pub asr: String,
    pub ours: String,
}

fn resolve_config(global: &GlobalArgs) -> Result<CliConfig> {
    let mut cfg = CliConfig::load(global.config.as_deref(), std::env::vars())?;
    if let Some(t) = global.threshold {
        cfg.threshold = t;
    }
    if let Some(p) = global.parallel {
        cfg.parallel = p;
    }
    cfg.mock |= global.mock;
    cfg.validate()?;
    Ok(cfg)
}

fn emit_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn run(global: &GlobalArgs, command: Command) -> Result<Outcome> {
    let cfg = resolve_config(global)?;
    let json = global.json;
    match command {
        Command::Parse { path } => parse(&cfg, &path, json),
        Command::Stats { root, format } => stats(&cfg, &root, if json { "json" } else { &format }),
        Command::Wer {
            manifest,
            ref_dir,
            hyp_dir,
        } => {
            let pairs = match (manifest, ref_dir, hyp_dir) {
                (Some(m), _, _) => read_pairs(&m)?,
                (None, Some(r), Some(h)) => pair_dirs(&r, &h)?,
                _ => bail!("give --manifest or both --ref-dir and --hyp-dir"),
            };
            wer(&cfg, &pairs, json)
        }
        Command::Filter { input, inclusive } => filter(&cfg, &input, inclusive, json),
        Command::Gestures {
            cha,
            frames,
            id,
            start_ms,
            end_ms,
        } => {
            let segment = match (start_ms, end_ms) {
                (Some(a), Some(b)) => Some(TimeSpan::new(a, b)?),
                _ => None,
            };
            gestures(&cfg, cha.as_deref(), frames.as_deref(), id, segment, json)
        }
        Command::Rewrite { text, gestures, id } => rewrite(&cfg, &text, &gestures, id, json),
        Command::Pipeline { manifest, out } => pipeline(&cfg, &manifest, out.as_deref(), json),
        Command::CaseReport { report } => case_report(&report, json),
    }
}

fn parse(cfg: &CliConfig, path: &Path, json: bool) -> Result<Outcome> {
    if path.is_dir() {
        let opts = CorpusOptions {
            extension: cfg.extension.trim_start_matches('.').to_string(),
        };
        let corpus = parse_corpus_with(path, &opts)?;
        for d in &corpus.diagnostics {
            eprintln!("{}: {}", d.path, d.message);
        }
        if json {
            emit_json(&corpus)?;
        } else {
            for f in &corpus.files {
                let gestures: usize = f
                    .utterances
                    .iter()
                    .map(|u| u.gesture_labels().count())
                    .sum();
                println!(
                    "{}\t{} utterances\t{} gestures",
                    f.path,
                    f.utterances.len(),
                    gestures
                );
            }
        }
        return Ok(Outcome::from_failures(!corpus.diagnostics.is_empty()));
    }
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    match parse_bytes(&path.display().to_string(), &bytes) {
        Ok(file) => {
            if json {
                emit_json(&file)?;
            } else {
                print!("{}", chat::serialize(&file));
            }
            Ok(Outcome::Success)
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            Ok(Outcome::ItemFailures)
        }
    }
}

fn stats(cfg: &CliConfig, root: &Path, format: &str) -> Result<Outcome> {
    let format: StatsFormat = format.parse()?;
    let opts = CorpusOptions {
        extension: cfg.extension.trim_start_matches('.').to_string(),
    };
    let corpus = parse_corpus_with(root, &opts)?;
    for d in &corpus.diagnostics {
        eprintln!("{}: {}", d.path, d.message);
    }
    let report = compute_stats::<f64>(&corpus);
    print!("{}", render(&report, format)?);
    Ok(Outcome::from_failures(!corpus.diagnostics.is_empty()))
}

fn read_pairs(path: &Path) -> Result<Vec<WerPair>> {
    let text = read_input(path)?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let pair: WerPair = serde_json::from_str(line)
            .with_context(|| format!("{} line {}", path.display(), i + 1))?;
        pairs.push(pair);
    }
    Ok(pairs)
}

fn txt_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("cannot read {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            if let Some(stem) = path.file_stem() {
                out.push((stem.to_string_lossy().into_owned(), path));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Pairs `ref_dir/x.txt` with `hyp_dir/x.txt`. A missing hypothesis counts as
/// empty output.
fn pair_dirs(ref_dir: &Path, hyp_dir: &Path) -> Result<Vec<WerPair>> {
    let refs = txt_files(ref_dir)?;
    let hyps = txt_files(hyp_dir)?;
    for (stem, _) in &hyps {
        if !refs.iter().any(|(r, _)| r == stem) {
            log::warn!("hypothesis {stem} has no reference; ignored");
        }
    }
    let mut pairs = Vec::new();
    for (stem, path) in refs {
        let reference = std::fs::read_to_string(&path)?;
        let hypothesis = match hyps.iter().find(|(h, _)| *h == stem) {
            Some((_, p)) => std::fs::read_to_string(p)?,
            None => {
                log::warn!("reference {stem} has no hypothesis; scored against empty output");
                String::new()
            }
        };
        pairs.push(WerPair::new(stem, reference, hypothesis));
    }
    Ok(pairs)
}

fn wer(cfg: &CliConfig, pairs: &[WerPair], json: bool) -> Result<Outcome> {
    let report: WerReport64 = corpus_wer(pairs, &cfg.normalization())?;
    if json {
        emit_json(&report)?;
    } else {
        print!("{}", render_wer_table(&report));
    }
    Ok(Outcome::Success)
}

fn filter(cfg: &CliConfig, input: &Path, inclusive: bool, json: bool) -> Result<Outcome> {
    let transcript: ScoredTranscript = serde_json::from_str(&read_input(input)?)
        .with_context(|| format!("invalid transcript {}", input.display()))?;
    let options = FilterOptions {
        inclusive: inclusive || cfg.inclusive_threshold,
    };
    let filtered = filter_tokens(&transcript, cfg.threshold, options)?;
    if json {
        emit_json(&filtered)?;
    } else {
        println!("{}", filtered.text());
        let op = if options.inclusive { ">=" } else { ">" };
        eprintln!(
            "kept {} of {} tokens (confidence {op} {})",
            filtered.tokens().len(),
            transcript.tokens().len(),
            cfg.threshold
        );
    }
    Ok(Outcome::Success)
}

fn print_events(events: &[GestureEvent], json: bool) -> Result<()> {
    if json {
        return emit_json(&events);
    }
    for e in events {
        let span = e.span.map_or("-".to_string(), |s| s.to_string());
        let utt = e.utterance_index.map_or("-".to_string(), |i| i.to_string());
        println!("{}\t{span}\t{utt}", e.label);
    }
    Ok(())
}

fn gestures(
    cfg: &CliConfig,
    cha: Option<&Path>,
    frames: Option<&Path>,
    id: Option<String>,
    segment: Option<TimeSpan>,
    json: bool,
) -> Result<Outcome> {
    if let Some(path) = cha {
        let bytes =
            std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        let file = parse_bytes(&path.display().to_string(), &bytes)
            .with_context(|| format!("cannot parse {}", path.display()))?;
        print_events(&extract_gesture_events(&file), json)?;
        return Ok(Outcome::Success);
    }
    let dir = frames.context("give --cha or --frames")?;
    let id = id.unwrap_or_else(|| {
        dir.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let cancel = Arc::new(AtomicBool::new(false));
    let Some(recognizer) = backends::gesture(cfg, &cancel)? else {
        bail!("no gesture backend configured: set vision_base_url or use --mock");
    };
    let set = FrameSet::from_dir(id, dir, segment, cfg.frame_count)?;
    match recognizer.recognize(&set, &cfg.candidate_labels()) {
        Ok(events) => {
            print_events(&events, json)?;
            Ok(Outcome::Success)
        }
        Err(e) => {
            eprintln!("{}: {e}", set.id);
            Ok(Outcome::ItemFailures)
        }
    }
}

fn rewrite(
    cfg: &CliConfig,
    text: &str,
    labels: &[String],
    id: String,
    json: bool,
) -> Result<Outcome> {
    let cancel = Arc::new(AtomicBool::new(false));
    let rewriter = backends::rewriter(cfg, &cancel)?;
    let gestures = labels
        .iter()
        .map(|l| GestureEvent::detected(GestureLabel::parse(l), None, None))
        .collect();
    let input = FusionInput {
        utterance_id: id.clone(),
        asr_raw: text.to_string(),
        asr_words: normalize(text, &cfg.normalization()),
        gestures,
        context: RewriteContext {
            utterance_id: Some(id.clone()),
            task: cfg.task.clone(),
            notes: None,
        },
        provenance: Provenance {
            prompts_hash: backends::templates(cfg)?.digest(),
            ..Provenance::default()
        },
        ..FusionInput::default()
    };
    match fuse_utterance(input, rewriter.as_ref()) {
        Ok(u) => {
            if json {
                emit_json(&u)?;
            } else {
                println!("{}", u.final_text);
            }
            Ok(Outcome::Success)
        }
        Err(e) => {
            eprintln!("{id}: {e}");
            Ok(Outcome::ItemFailures)
        }
    }
}

fn pipeline(cfg: &CliConfig, manifest: &Path, out: Option<&Path>, json: bool) -> Result<Outcome> {
    let manifest = Manifest::load(manifest)?;
    let cancel = Arc::new(AtomicBool::new(false));
    let handler_flag = cancel.clone();
    if let Err(e) = ctrlc::set_handler(move || {
        eprintln!("interrupted; finishing with a partial report");
        handler_flag.store(true, Ordering::SeqCst);
    }) {
        log::warn!("cannot install Ctrl-C handler: {e}");
    }
    let templates = backends::templates(cfg)?;
    let backends = Backends {
        asr: backends::speech(cfg, &cancel)?,
        gesture: backends::gesture(cfg, &cancel)?,
        rewriter: backends::rewriter(cfg, &cancel)?,
    };
    let config = cfg.pipeline(templates.digest())?;
    let report = run_pipeline(&manifest, &backends, &config, Some(&cancel))?;

    if let Some(path) = out {
        let text = serde_json::to_string_pretty(&report)? + "\n";
        std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    if json {
        emit_json(&report)?;
    } else {
        print!("{}", render_case_report(&report.utterances));
    }
    for f in &report.failures {
        eprintln!("{} failed at {}: {}", f.utterance_id, f.stage, f.error);
    }
    eprintln!(
        "{} items: {} succeeded, {} failed{}",
        report.item_count(),
        report.utterances.len(),
        report.failures.len(),
        if report.incomplete {
            " (incomplete)"
        } else {
            ""
        }
    );
    Ok(Outcome::from_failures(
        !report.failures.is_empty() || report.incomplete,
    ))
}

fn case_report(path: &Path, json: bool) -> Result<Outcome> {
    let report: PipelineReport = serde_json::from_str(&read_input(path)?)
        .with_context(|| format!("invalid pipeline report {}", path.display()))?;
    if json {
        let rows: Vec<CaseRow> = report
            .utterances
            .iter()
            .map(|u| CaseRow {
                index: u.utterance_id.clone(),
                original: u.original.clone().unwrap_or_default(),
                asr: u.asr_raw.clone(),
                ours: u.final_text.clone(),
            })
            .collect();
        emit_json(&rows)?;
    } else {
        print!("{}", render_case_report(&report.utterances));
    }
    Ok(Outcome::Success)
}
