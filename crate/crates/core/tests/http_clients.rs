use gesture_asr::asr_eval::WordSequence;
use gesture_asr::clients::http::{
    HttpConfig, HttpGestureRecognizer, HttpRewriter, HttpSpeechRecognizer,
};
use gesture_asr::clients::{
    AudioRef, ClientError, Frame, FrameSet, GestureRecognizer, PromptTemplates, RewriteContext,
    Rewriter, SpeechRecognizer, UnmatchedLabel,
};
use gesture_asr::event::GestureEvent;
use gesture_asr::label::GestureLabel;
use gesture_asr::span::TimeSpan;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::AtomicBool;
use std::sync::{Arc, Mutex};
use std::time::Duration;

/// Serves canned `(status, body)` replies in order and records each request.
struct Server {
    url: String,
    requests: Arc<Mutex<Vec<String>>>,
}

impl Server {
    fn start(replies: Vec<(u16, &str)>) -> Self {
        Self::start_with_delay(replies, Duration::ZERO)
    }

    fn start_with_delay(replies: Vec<(u16, &str)>, delay: Duration) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = requests.clone();
        let replies: Vec<(u16, String)> = replies
            .into_iter()
            .map(|(s, b)| (s, b.to_string()))
            .collect();
        std::thread::spawn(move || {
            for (status, body) in replies {
                let Ok((stream, _)) = listener.accept() else {
                    return;
                };
                let req = read_request(&stream);
                log.lock().unwrap().push(req);
                std::thread::sleep(delay);
                let mut stream = stream;
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
            }
        });
        Self { url, requests }
    }

    fn requests(&self) -> Vec<String> {
        self.requests.lock().unwrap().clone()
    }
}

fn read_request(stream: &TcpStream) -> String {
    let mut reader = BufReader::new(stream);
    let mut head = String::new();
    let mut content_length = 0usize;
    let mut chunked = false;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            break;
        }
        let lower = line.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("content-length:") {
            content_length = v.trim().parse().unwrap_or(0);
        }
        if lower.starts_with("transfer-encoding:") && lower.contains("chunked") {
            chunked = true;
        }
        head.push_str(&line);
        if line == "\r\n" {
            break;
        }
    }
    let mut body = Vec::new();
    if chunked {
        loop {
            let mut size = String::new();
            reader.read_line(&mut size).unwrap();
            let n = usize::from_str_radix(size.trim(), 16).unwrap_or(0);
            let mut chunk = vec![0; n + 2];
            reader.read_exact(&mut chunk).unwrap();
            if n == 0 {
                break;
            }
            body.extend_from_slice(&chunk[..n]);
        }
    } else {
        body.resize(content_length, 0);
        reader.read_exact(&mut body).unwrap();
    }
    head + &String::from_utf8_lossy(&body)
}

fn config(url: &str, retries: u32) -> HttpConfig {
    let mut c = HttpConfig::new(url, "test-model");
    c.api_key = Some("sk-test".into());
    c.retries = retries;
    c.backoff = Duration::from_millis(1);
    c.timeout = Duration::from_secs(5);
    c
}

const TRANSCRIPTION: &str = r#"{"text":"I um tomato","words":[
 {"word":"I","start":6.0,"end":6.2,"probability":0.9},
 {"word":"um","start":6.2,"end":6.5,"probability":0.1},
 {"word":"tomato","start":7.0,"end":7.6,"probability":0.8}]}"#;

fn audio_file(dir: &tempfile::TempDir) -> AudioRef {
    let path = dir.path().join("audio-17.wav");
    std::fs::write(&path, b"RIFF0000WAVEfake").unwrap();
    AudioRef::from_path(path).unwrap()
}

#[test]
fn asr_uploads_multipart_and_decodes_words() {
    let server = Server::start(vec![(200, TRANSCRIPTION)]);
    let dir = tempfile::tempdir().unwrap();
    let asr = HttpSpeechRecognizer::new(config(&server.url, 0));
    let t = asr.recognize(&audio_file(&dir)).unwrap();
    assert_eq!(t.audio_id, "audio-17");
    assert_eq!(t.text(), "I um tomato");
    assert_eq!(t.tokens()[0].span, Some(TimeSpan::new(6000, 6200).unwrap()));

    let req = &server.requests()[0];
    assert!(req.starts_with("POST /v1/audio/transcriptions"));
    assert!(req.contains("Bearer sk-test"));
    assert!(req.contains("multipart/form-data"));
    assert!(req.contains("verbose_json"));
    assert!(req.contains("RIFF0000WAVEfake"));
}

#[test]
fn asr_by_url_sends_json() {
    let server = Server::start(vec![(200, TRANSCRIPTION)]);
    let asr = HttpSpeechRecognizer::new(config(&server.url, 0));
    let audio = AudioRef::from_url(
        "https://example.org/clip-1.mp3",
        gesture_asr::clients::AudioFormat::Mp3,
    );
    let t = asr.recognize(&audio).unwrap();
    assert_eq!(t.audio_id, "clip-1");
    assert!(server.requests()[0].contains(r#""url":"https://example.org/clip-1.mp3""#));
}

#[test]
fn server_errors_are_retried_within_budget() {
    let server = Server::start(vec![
        (503, "busy"),
        (429, "slow down"),
        (200, TRANSCRIPTION),
    ]);
    let dir = tempfile::tempdir().unwrap();
    let asr = HttpSpeechRecognizer::new(config(&server.url, 2));
    assert!(asr.recognize(&audio_file(&dir)).is_ok());
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn retry_budget_is_respected() {
    let server = Server::start(vec![(500, "a"), (500, "b"), (500, "c")]);
    let dir = tempfile::tempdir().unwrap();
    let asr = HttpSpeechRecognizer::new(config(&server.url, 1));
    let err = asr.recognize(&audio_file(&dir)).unwrap_err();
    assert_eq!(
        err,
        ClientError::Backend {
            status: 500,
            body: "b".into()
        }
    );
    assert_eq!(server.requests().len(), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let server = Server::start(vec![(400, "bad request"), (200, TRANSCRIPTION)]);
    let dir = tempfile::tempdir().unwrap();
    let asr = HttpSpeechRecognizer::new(config(&server.url, 3));
    assert!(matches!(
        asr.recognize(&audio_file(&dir)),
        Err(ClientError::Backend { status: 400, .. })
    ));
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn unreachable_host_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let dir = tempfile::tempdir().unwrap();
    let asr = HttpSpeechRecognizer::new(config(&format!("http://127.0.0.1:{port}"), 1));
    assert!(matches!(
        asr.recognize(&audio_file(&dir)),
        Err(ClientError::Transport(_))
    ));
}

#[test]
fn slow_server_hits_the_timeout() {
    let server = Server::start_with_delay(vec![(200, TRANSCRIPTION)], Duration::from_millis(800));
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(&server.url, 0);
    cfg.timeout = Duration::from_millis(200);
    let asr = HttpSpeechRecognizer::new(cfg);
    assert!(matches!(
        asr.recognize(&audio_file(&dir)),
        Err(ClientError::Transport(_))
    ));
}

#[test]
fn cancelled_client_sends_nothing() {
    let server = Server::start(vec![(200, TRANSCRIPTION)]);
    let dir = tempfile::tempdir().unwrap();
    let asr = HttpSpeechRecognizer::new(config(&server.url, 0))
        .with_cancel(Arc::new(AtomicBool::new(true)));
    assert_eq!(
        asr.recognize(&audio_file(&dir)),
        Err(ClientError::Cancelled)
    );
    assert!(server.requests().is_empty());
}

fn frame_set(dir: &tempfile::TempDir) -> FrameSet {
    let mut frames = Vec::new();
    for t in [6000u64, 7000, 8000] {
        let path = dir.path().join(format!("frame_{t}.jpg"));
        std::fs::write(&path, [0xffu8, 0xd8, 0xff]).unwrap();
        frames.push(Frame {
            path,
            timestamp_ms: t,
        });
    }
    FrameSet::new("utt-3", frames, TimeSpan::new(6000, 9000).unwrap()).unwrap()
}

fn chat(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]})
        .to_string()
}

#[test]
fn vision_client_sends_frames_and_parses_label() {
    let reply = chat("The speaker is spreading something on bread.");
    let server = Server::start(vec![(200, &reply)]);
    let dir = tempfile::tempdir().unwrap();
    let rec = HttpGestureRecognizer::new(
        config(&server.url, 0),
        PromptTemplates::default(),
        UnmatchedLabel::Error,
    );
    let events = rec
        .recognize(&frame_set(&dir), &GestureLabel::NAMED)
        .unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].label, GestureLabel::Spreading);
    assert_eq!(events[0].span, Some(TimeSpan::new(6000, 9000).unwrap()));

    let req = &server.requests()[0];
    assert!(req.starts_with("POST /v1/chat/completions"));
    assert_eq!(req.matches("data:image/jpeg;base64,/9j/").count(), 3);
    for label in GestureLabel::NAMED {
        assert!(req.contains(&format!("- {label}")));
    }
}

#[test]
fn vision_client_none_and_unparseable() {
    let none = chat("none");
    let junk = chat("waving hello");
    let server = Server::start(vec![(200, &none), (200, &junk)]);
    let dir = tempfile::tempdir().unwrap();
    let rec = HttpGestureRecognizer::new(
        config(&server.url, 0),
        PromptTemplates::default(),
        UnmatchedLabel::Error,
    );
    assert!(rec
        .recognize(&frame_set(&dir), &GestureLabel::NAMED)
        .unwrap()
        .is_empty());
    assert!(matches!(
        rec.recognize(&frame_set(&dir), &GestureLabel::NAMED),
        Err(ClientError::UnparseableLabel(_))
    ));
}

#[test]
fn rewriter_client_round_trip() {
    let ok = chat("  I cut the tomato.\n");
    let empty = chat("");
    let server = Server::start(vec![(200, &ok), (200, &empty)]);
    let rw = HttpRewriter::new(config(&server.url, 0), PromptTemplates::default());
    let g = vec![GestureEvent::detected(GestureLabel::Cutting, None, None)];
    let words = WordSequence::from_text("i um tomato");
    let out = rw.rewrite(&words, &g, &RewriteContext::default()).unwrap();
    assert_eq!(out.final_text, "I cut the tomato.");
    assert_eq!(out.used_gestures, vec![GestureLabel::Cutting]);
    assert!(server.requests()[0].contains("i um tomato"));
    assert_eq!(
        rw.rewrite(&words, &g, &RewriteContext::default()),
        Err(ClientError::EmptyResponse)
    );
}
