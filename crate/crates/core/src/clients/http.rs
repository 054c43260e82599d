//! HTTP backends speaking the common JSON chat-completion and transcription
//! APIs.
//!
//! Every request runs under a global timeout and a bounded retry budget;
//! connection failures, 429 and 5xx responses are retried with linear
//! backoff, other statuses fail immediately. An in-flight limiter caps the
//! number of concurrent requests per client.

use super::{
    build_gesture_prompt, build_rewrite_prompt, parse_gesture_reply, AudioLocation, AudioRef,
    ClientError, FrameSet, GestureRecognizer, PromptTemplates, RewriteContext, RewriteResult,
    Rewriter, SpeechRecognizer, UnmatchedLabel,
};
use crate::asr_eval::WordSequence;
use crate::event::GestureEvent;
use crate::filter::{ScoredToken, ScoredTranscript};
use crate::label::GestureLabel;
use crate::span::TimeSpan;
use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;
use ureq::http::Response;
use ureq::unversioned::multipart::{Form, Part};
use ureq::Body;

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    /// API root, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    /// Extra attempts after the first one.
    pub retries: u32,
    pub backoff: Duration,
    pub max_in_flight: usize,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            model: model.into(),
            timeout: Duration::from_secs(60),
            retries: 2,
            backoff: Duration::from_millis(500),
            max_in_flight: 4,
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), path)
    }
}

/// Counting semaphore for concurrent requests.
#[derive(Debug)]
pub struct InFlightLimiter {
    max: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a>(&'a InFlightLimiter);

impl InFlightLimiter {
    pub fn new(max: usize) -> Self {
        Self {
            max: max.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut active = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *active >= self.max {
            active = self.freed.wait(active).unwrap_or_else(|e| e.into_inner());
        }
        *active += 1;
        Permit(self)
    }

    pub fn active(&self) -> usize {
        *self.active.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock().unwrap_or_else(|e| e.into_inner());
        *active -= 1;
        self.0.freed.notify_one();
    }
}

struct Transport {
    agent: ureq::Agent,
    config: HttpConfig,
    limiter: Arc<InFlightLimiter>,
    cancel: Option<Arc<AtomicBool>>,
}

impl Transport {
    fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Self {
            agent,
            limiter: Arc::new(InFlightLimiter::new(config.max_in_flight)),
            config,
            cancel: None,
        }
    }

    fn auth(&self) -> Option<String> {
        self.config.api_key.as_ref().map(|k| format!("Bearer {k}"))
    }

    fn post_json(&self, backend: &str, path: &str, body: &Value) -> Result<String, ClientError> {
        let payload = body.to_string();
        let url = self.config.url(path);
        self.with_retries(backend, || {
            let mut req = self
                .agent
                .post(&url)
                .header("Content-Type", "application/json");
            if let Some(auth) = self.auth() {
                req = req.header("Authorization", auth);
            }
            req.send(payload.as_str()).map_err(transport_error)
        })
    }

    fn with_retries<F>(&self, backend: &str, send: F) -> Result<String, ClientError>
    where
        F: Fn() -> Result<Response<Body>, ClientError>,
    {
        let attempts = self.config.retries + 1;
        let mut attempt = 0;
        loop {
            attempt += 1;
            if self
                .cancel
                .as_ref()
                .is_some_and(|c| c.load(Ordering::SeqCst))
            {
                return Err(ClientError::Cancelled);
            }
            let result = {
                let _permit = self.limiter.acquire();
                send().and_then(read_response)
            };
            match result {
                Ok(body) => return Ok(body),
                Err(e) if is_retryable(&e) && attempt < attempts => {
                    log::warn!("{backend}: attempt {attempt}/{attempts} failed: {e}; retrying");
                    std::thread::sleep(self.config.backoff * attempt);
                }
                Err(e) => return Err(e),
            }
        }
    }
}

fn transport_error(e: ureq::Error) -> ClientError {
    ClientError::Transport(e.to_string())
}

fn read_response(mut resp: Response<Body>) -> Result<String, ClientError> {
    let status = resp.status().as_u16();
    let body = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| ClientError::Transport(e.to_string()))?;
    if (200..300).contains(&status) {
        Ok(body)
    } else {
        Err(ClientError::Backend { status, body })
    }
}

fn is_retryable(e: &ClientError) -> bool {
    match e {
        ClientError::Transport(_) => true,
        ClientError::Backend { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}

#[derive(Deserialize)]
struct TranscriptionWire {
    #[serde(default)]
    words: Option<Vec<WordWire>>,
    #[serde(default)]
    segments: Option<Vec<SegmentWire>>,
}

#[derive(Deserialize)]
struct SegmentWire {
    #[serde(default)]
    words: Vec<WordWire>,
}

#[derive(Deserialize)]
struct WordWire {
    word: String,
    start: Option<f64>,
    end: Option<f64>,
    #[serde(alias = "confidence")]
    probability: Option<f64>,
}

/// Decodes a verbose transcription response with word timings (seconds)
/// and per-word probabilities. Words may sit at the top level or inside
/// segments.
pub fn decode_transcription(
    audio_id: &str,
    source: &str,
    body: &str,
) -> Result<ScoredTranscript, ClientError> {
    let wire: TranscriptionWire =
        serde_json::from_str(body).map_err(|e| ClientError::Decode(e.to_string()))?;
    let words = match (wire.words, wire.segments) {
        (Some(w), _) => w,
        (None, Some(segs)) => segs.into_iter().flat_map(|s| s.words).collect(),
        (None, None) => {
            return Err(ClientError::Decode(
                "response has no word-level results".into(),
            ))
        }
    };
    let mut tokens = Vec::with_capacity(words.len());
    for w in words {
        let text = w.word.trim();
        if text.is_empty() {
            continue;
        }
        let confidence = w
            .probability
            .ok_or_else(|| ClientError::Decode(format!("word {text:?} has no confidence")))?;
        let mut token = ScoredToken::new(text, confidence);
        if let (Some(start), Some(end)) = (w.start, w.end) {
            let (s, e) = (to_ms(start)?, to_ms(end)?);
            if let Ok(span) = TimeSpan::new(s, e) {
                token = token.with_span(span);
            }
        }
        tokens.push(token);
    }
    ScoredTranscript::new(audio_id, source, tokens).map_err(|e| ClientError::Decode(e.to_string()))
}

fn to_ms(seconds: f64) -> Result<u64, ClientError> {
    if !seconds.is_finite() || seconds < 0.0 {
        return Err(ClientError::Decode(format!("bad timestamp {seconds}")));
    }
    Ok((seconds * 1000.0).round() as u64)
}

/// Extracts the first choice's message text from a chat-completion response.
pub fn decode_chat_reply(body: &str) -> Result<String, ClientError> {
    let v: Value = serde_json::from_str(body).map_err(|e| ClientError::Decode(e.to_string()))?;
    let content = v
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .ok_or_else(|| ClientError::Decode("response has no choices[0].message.content".into()))?;
    let text = match content {
        Value::String(s) => s.clone(),
        Value::Array(parts) => parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join(""),
        Value::Null => String::new(),
        other => return Err(ClientError::Decode(format!("unexpected content {other}"))),
    };
    if text.trim().is_empty() {
        return Err(ClientError::EmptyResponse);
    }
    Ok(text)
}

/// Speech recognition through an `audio/transcriptions` endpoint.
///
/// Local files are uploaded as multipart form data; URLs are passed by
/// reference in a JSON body for servers that fetch audio themselves.
pub struct HttpSpeechRecognizer {
    transport: Transport,
    id: String,
}

impl HttpSpeechRecognizer {
    pub fn new(config: HttpConfig) -> Self {
        Self {
            id: format!("http-asr:{}", config.model),
            transport: Transport::new(config),
        }
    }

    pub fn with_cancel(mut self, flag: Arc<AtomicBool>) -> Self {
        self.transport.cancel = Some(flag);
        self
    }
}

impl SpeechRecognizer for HttpSpeechRecognizer {
    fn id(&self) -> &str {
        &self.id
    }

    fn recognize(&self, audio: &AudioRef) -> Result<ScoredTranscript, ClientError> {
        let t = &self.transport;
        let body = match &audio.location {
            AudioLocation::Path(path) => {
                if !path.is_file() {
                    return Err(ClientError::InvalidInput(format!(
                        "audio file {} not found",
                        path.display()
                    )));
                }
                let url = t.config.url("audio/transcriptions");
                let file_name = path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "audio".into());
                t.with_retries(&self.id, || {
                    let part = Part::file(path)
                        .map_err(|e| ClientError::InvalidInput(e.to_string()))?
                        .file_name(&file_name)
                        .mime_str(audio.format.mime())
                        .map_err(|e| ClientError::InvalidInput(e.to_string()))?;
                    let form = Form::new()
                        .text("model", &t.config.model)
                        .text("response_format", "verbose_json")
                        .text("timestamp_granularities[]", "word")
                        .part("file", part);
                    let mut req = t.agent.post(&url);
                    if let Some(auth) = t.auth() {
                        req = req.header("Authorization", auth);
                    }
                    req.send(form).map_err(transport_error)
                })?
            }
            AudioLocation::Url(url) => t.post_json(
                &self.id,
                "audio/transcriptions",
                &json!({
                    "model": t.config.model,
                    "url": url,
                    "response_format": "verbose_json",
                    "timestamp_granularities": ["word"],
                }),
            )?,
        };
        decode_transcription(&audio.id(), &self.id, &body)
    }
}

/// Gesture recognition with a vision chat model. Frames are sent inline as
/// base64 data URLs.
pub struct HttpGestureRecognizer {
    transport: Transport,
    templates: PromptTemplates,
    unmatched: UnmatchedLabel,
    id: String,
}

impl HttpGestureRecognizer {
    pub fn new(config: HttpConfig, templates: PromptTemplates, unmatched: UnmatchedLabel) -> Self {
        Self {
            id: format!("http-vision:{}", config.model),
            transport: Transport::new(config),
            templates,
            unmatched,
        }
    }

    pub fn with_cancel(mut self, flag: Arc<AtomicBool>) -> Self {
        self.transport.cancel = Some(flag);
        self
    }
}

fn image_data_url(path: &Path) -> Result<String, ClientError> {
    let bytes = std::fs::read(path)
        .map_err(|e| ClientError::InvalidInput(format!("{}: {e}", path.display())))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let mime = match ext.as_str() {
        "png" => "image/png",
        "webp" => "image/webp",
        "bmp" => "image/bmp",
        _ => "image/jpeg",
    };
    let data = base64::engine::general_purpose::STANDARD.encode(bytes);
    Ok(format!("data:{mime};base64,{data}"))
}

impl GestureRecognizer for HttpGestureRecognizer {
    fn id(&self) -> &str {
        &self.id
    }

    fn recognize(
        &self,
        frames: &FrameSet,
        candidates: &[GestureLabel],
    ) -> Result<Vec<GestureEvent>, ClientError> {
        let prompt = build_gesture_prompt(&self.templates, frames, candidates)?;
        let mut content = vec![json!({"type": "text", "text": prompt.user})];
        for img in &prompt.images {
            content.push(json!({"type": "image_url", "image_url": {"url": image_data_url(img)?}}));
        }
        let request = json!({
            "model": self.transport.config.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": content},
            ],
        });
        let body = self
            .transport
            .post_json(&self.id, "chat/completions", &request)?;
        let reply = decode_chat_reply(&body)?;
        let label = parse_gesture_reply(&reply, candidates, self.unmatched)?;
        Ok(label
            .into_iter()
            .map(|l| GestureEvent::detected(l, Some(frames.segment()), None))
            .collect())
    }
}

/// Contextual rewriting with a text chat model.
pub struct HttpRewriter {
    transport: Transport,
    templates: PromptTemplates,
    id: String,
}

impl HttpRewriter {
    pub fn new(config: HttpConfig, templates: PromptTemplates) -> Self {
        Self {
            id: format!("http-rewriter:{}", config.model),
            transport: Transport::new(config),
            templates,
        }
    }

    pub fn with_cancel(mut self, flag: Arc<AtomicBool>) -> Self {
        self.transport.cancel = Some(flag);
        self
    }
}

impl Rewriter for HttpRewriter {
    fn id(&self) -> &str {
        &self.id
    }

    fn rewrite(
        &self,
        asr_words: &WordSequence,
        gestures: &[GestureEvent],
        context: &RewriteContext,
    ) -> Result<RewriteResult, ClientError> {
        let prompt = build_rewrite_prompt(&self.templates, asr_words, gestures, context)?;
        let request = json!({
            "model": self.transport.config.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
        });
        let body = self
            .transport
            .post_json(&self.id, "chat/completions", &request)?;
        let model_raw = decode_chat_reply(&body)?;
        Ok(RewriteResult {
            final_text: model_raw.trim().to_string(),
            model_raw,
            used_gestures: gestures.iter().map(|g| g.label.clone()).collect(),
        })
    }
}
