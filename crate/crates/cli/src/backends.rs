use crate::config::CliConfig;
use anyhow::{bail, Context, Result};
use gesture_asr::clients::http::{HttpGestureRecognizer, HttpRewriter, HttpSpeechRecognizer};
use gesture_asr::clients::mock::{MockGestureRecognizer, MockRewriter, MockSpeechRecognizer};
use gesture_asr::clients::{GestureRecognizer, PromptTemplates, Rewriter, SpeechRecognizer};
use std::path::Path;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

pub fn templates(cfg: &CliConfig) -> Result<PromptTemplates> {
    let t = match &cfg.prompt_dir {
        Some(dir) => PromptTemplates::from_dir(dir)?,
        None => PromptTemplates::default(),
    };
    t.validate()?;
    Ok(t)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn speech(
    cfg: &CliConfig,
    cancel: &Arc<AtomicBool>,
) -> Result<Option<Arc<dyn SpeechRecognizer>>> {
    if cfg.mock {
        let mut m = match &cfg.mock_asr_fixtures {
            Some(p) => MockSpeechRecognizer::from_json(&read(p)?)
                .with_context(|| format!("invalid ASR fixtures {}", p.display()))?,
            None => MockSpeechRecognizer::default(),
        };
        for id in &cfg.mock_fail_asr {
            m = m.fail_on(id);
        }
        return Ok(Some(Arc::new(m)));
    }
    Ok(cfg.asr_base_url.as_ref().map(|url| {
        let http = cfg.http(url, &cfg.asr_api_key, &cfg.asr_model);
        Arc::new(HttpSpeechRecognizer::new(http).with_cancel(cancel.clone()))
            as Arc<dyn SpeechRecognizer>
    }))
}

pub fn gesture(
    cfg: &CliConfig,
    cancel: &Arc<AtomicBool>,
) -> Result<Option<Arc<dyn GestureRecognizer>>> {
    if cfg.mock {
        let mut m = match &cfg.mock_gesture_fixtures {
            Some(p) => MockGestureRecognizer::from_json(&read(p)?)
                .with_context(|| format!("invalid gesture fixtures {}", p.display()))?,
            None => MockGestureRecognizer::new(),
        };
        for id in &cfg.mock_fail_gesture {
            m = m.fail_on(id);
        }
        return Ok(Some(Arc::new(m)));
    }
    match &cfg.vision_base_url {
        Some(url) => {
            let http = cfg.http(url, &cfg.vision_api_key, &cfg.vision_model);
            let r = HttpGestureRecognizer::new(http, templates(cfg)?, cfg.unmatched()?)
                .with_cancel(cancel.clone());
            Ok(Some(Arc::new(r)))
        }
        None => Ok(None),
    }
}

pub fn rewriter(cfg: &CliConfig, cancel: &Arc<AtomicBool>) -> Result<Arc<dyn Rewriter>> {
    if cfg.mock {
        let mut m = MockRewriter::new();
        for id in &cfg.mock_fail_rewrite {
            m = m.fail_on(id);
        }
        return Ok(Arc::new(m));
    }
    let Some(url) = &cfg.rewrite_base_url else {
        bail!("no rewriter configured: set rewrite_base_url or use --mock");
    };
    let http = cfg.http(url, &cfg.rewrite_api_key, &cfg.rewrite_model);
    Ok(Arc::new(
        HttpRewriter::new(http, templates(cfg)?).with_cancel(cancel.clone()),
    ))
}
