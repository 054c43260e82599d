//! Run configuration: a flat TOML file, then `GESTURE_ASR_*` environment
//! variables, then command-line flags.

use anyhow::{anyhow, bail, Context, Result};
use gesture_asr::asr_eval::NormalizationConfig;
use gesture_asr::clients::http::HttpConfig;
use gesture_asr::clients::{default_candidates, UnmatchedLabel};
use gesture_asr::fusion::{GestureMode, OverlapRule, PipelineConfig};
use gesture_asr::label::GestureLabel;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::time::Duration;

pub const ENV_PREFIX: &str = "GESTURE_ASR_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub threshold: f64,
    pub inclusive_threshold: bool,
    /// Run the confidence filter inside `pipeline`.
    pub apply_filter: bool,
    pub drop_fillers: bool,
    pub keep_fragments: bool,
    pub parallel: usize,
    pub frame_count: usize,
    pub slack_ms: u64,
    pub gesture_mode: String,
    pub candidates: Vec<String>,
    /// `error` or `other`.
    pub unmatched_label: String,
    pub task: Option<String>,
    pub extension: String,
    pub prompt_dir: Option<PathBuf>,

    pub timeout_s: f64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub max_in_flight: usize,
    pub asr_base_url: Option<String>,
    pub asr_api_key: Option<String>,
    pub asr_model: String,
    pub vision_base_url: Option<String>,
    pub vision_api_key: Option<String>,
    pub vision_model: String,
    pub rewrite_base_url: Option<String>,
    pub rewrite_api_key: Option<String>,
    pub rewrite_model: String,

    pub mock: bool,
    pub mock_asr_fixtures: Option<PathBuf>,
    pub mock_gesture_fixtures: Option<PathBuf>,
    pub mock_fail_asr: Vec<String>,
    pub mock_fail_gesture: Vec<String>,
    pub mock_fail_rewrite: Vec<String>,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            threshold: 0.2,
            inclusive_threshold: false,
            apply_filter: true,
            drop_fillers: false,
            keep_fragments: false,
            parallel: 1,
            frame_count: 4,
            slack_ms: OverlapRule::default().slack_ms,
            gesture_mode: "auto".into(),
            candidates: default_candidates()
                .iter()
                .map(|l| l.as_str().to_string())
                .collect(),
            unmatched_label: "error".into(),
            task: None,
            extension: "cha".into(),
            prompt_dir: None,
            timeout_s: 60.0,
            retries: 2,
            backoff_ms: 500,
            max_in_flight: 4,
            asr_base_url: None,
            asr_api_key: None,
            asr_model: "whisper-1".into(),
            vision_base_url: None,
            vision_api_key: None,
            vision_model: "gpt-4o".into(),
            rewrite_base_url: None,
            rewrite_api_key: None,
            rewrite_model: "gpt-4o".into(),
            mock: false,
            mock_asr_fixtures: None,
            mock_gesture_fixtures: None,
            mock_fail_asr: Vec::new(),
            mock_fail_gesture: Vec::new(),
            mock_fail_rewrite: Vec::new(),
        }
    }
}

/// Keys holding paths; relative values in a config file are taken relative
/// to that file.
const PATH_KEYS: [&str; 3] = ["prompt_dir", "mock_asr_fixtures", "mock_gesture_fixtures"];

impl CliConfig {
    /// File (optional) plus environment overrides from `env`.
    pub fn load<I>(file: Option<&Path>, env: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut map = match serde_json::to_value(Self::default())? {
            Value::Object(m) => m,
            _ => unreachable!("config serializes to an object"),
        };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            let table: toml::Table = toml::from_str(&text)
                .with_context(|| format!("invalid config {}", path.display()))?;
            let base = path.parent().unwrap_or(Path::new(""));
            for (key, value) in table {
                if !map.contains_key(&key) {
                    bail!("unknown config key {key:?} in {}", path.display());
                }
                let mut v = serde_json::to_value(&value)?;
                if PATH_KEYS.contains(&key.as_str()) {
                    if let Value::String(s) = &v {
                        v = Value::String(base.join(s).to_string_lossy().into_owned());
                    }
                }
                map.insert(key, v);
            }
        }
        let mut env: Vec<(String, String)> = env
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        env.sort();
        for (name, raw) in env {
            let key = name[ENV_PREFIX.len()..].to_ascii_lowercase();
            let slot = map
                .get(&key)
                .ok_or_else(|| anyhow!("unknown config variable {name}"))?;
            let v = env_value(slot, &raw).with_context(|| format!("invalid value for {name}"))?;
            map.insert(key, v);
        }
        let cfg: Self = serde_json::from_value(Value::Object(map)).context("invalid config")?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            bail!("threshold {} is outside [0, 1]", self.threshold);
        }
        if self.parallel == 0 {
            bail!("parallel must be at least 1");
        }
        if self.frame_count == 0 {
            bail!("frame_count must be at least 1");
        }
        if self.max_in_flight == 0 {
            bail!("max_in_flight must be at least 1");
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            bail!("timeout_s must be positive");
        }
        if self.candidates.is_empty() {
            bail!("candidate label list is empty");
        }
        self.gesture_mode()?;
        self.unmatched()?;
        Ok(())
    }

    pub fn gesture_mode(&self) -> Result<GestureMode> {
        self.gesture_mode.parse().map_err(|e: String| anyhow!(e))
    }

    pub fn unmatched(&self) -> Result<UnmatchedLabel> {
        match self.unmatched_label.as_str() {
            "error" => Ok(UnmatchedLabel::Error),
            "other" => Ok(UnmatchedLabel::Other),
            other => bail!("unmatched_label must be \"error\" or \"other\", not {other:?}"),
        }
    }

    pub fn candidate_labels(&self) -> Vec<GestureLabel> {
        self.candidates
            .iter()
            .map(|c| GestureLabel::parse(c))
            .collect()
    }

    pub fn normalization(&self) -> NormalizationConfig {
        NormalizationConfig {
            drop_fillers: self.drop_fillers,
            keep_fragments: self.keep_fragments,
        }
    }

    pub fn pipeline(&self, prompts_hash: String) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            threshold: self.threshold,
            inclusive: self.inclusive_threshold,
            apply_filter: self.apply_filter,
            gesture_mode: self.gesture_mode()?,
            candidates: self.candidate_labels(),
            frame_count: self.frame_count,
            overlap: OverlapRule {
                slack_ms: self.slack_ms,
            },
            normalization: self.normalization(),
            parallel: self.parallel,
            prompts_hash,
            task: self.task.clone(),
        })
    }

    pub fn http(&self, base_url: &str, api_key: &Option<String>, model: &str) -> HttpConfig {
        HttpConfig {
            api_key: api_key.clone(),
            timeout: Duration::from_secs_f64(self.timeout_s),
            retries: self.retries,
            backoff: Duration::from_millis(self.backoff_ms),
            max_in_flight: self.max_in_flight,
            ..HttpConfig::new(base_url, model)
        }
    }
}

/// Reads an environment string as the same JSON type as the current value.
/// Lists are comma-separated.
fn env_value(current: &Value, raw: &str) -> Result<Value> {
    Ok(match current {
        Value::Bool(_) => Value::Bool(match raw.trim().to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" | "on" => true,
            "0" | "false" | "no" | "off" => false,
            other => bail!("expected a boolean, got {other:?}"),
        }),
        Value::Number(n) if n.is_f64() => serde_json::to_value(raw.trim().parse::<f64>()?)?,
        Value::Number(_) => serde_json::to_value(raw.trim().parse::<u64>()?)?,
        Value::Array(_) => Value::Array(
            raw.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| Value::String(s.to_string()))
                .collect(),
        ),
        _ => Value::String(raw.to_string()),
    })
}
