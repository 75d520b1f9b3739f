//! Translation into the pivot language: a glossary stub for offline use and
//! a remote HTTP client with a persistent cache, rate limit and retries.
//!
//! Remote wire format (LibreTranslate style):
//! request `{"q", "source", "target", "format": "text", "api_key"?}`,
//! response `{"translatedText"}`.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use finnews_core::article::hex_digest;
use finnews_core::glossary::Glossary;
use finnews_core::{Article, Language};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const API_KEY_ENV: &str = "FINNEWS_TRANSLATE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TranslatorMode {
    GlossaryStub,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslatorConfig {
    pub mode: TranslatorMode,
    #[serde(default)]
    pub glossary_path: Option<PathBuf>,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Usually supplied through the environment instead of the file.
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default = "default_rps")]
    pub max_requests_per_second: f64,
    #[serde(default = "default_cache_path")]
    pub cache_path: PathBuf,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    /// First retry delay; doubles after each failed attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_rps() -> f64 {
    5.0
}

fn default_cache_path() -> PathBuf {
    PathBuf::from("translation-cache.jsonl")
}

fn default_attempts() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    500
}

impl TranslatorConfig {
    pub fn glossary(path: impl Into<PathBuf>) -> Self {
        TranslatorConfig {
            mode: TranslatorMode::GlossaryStub,
            glossary_path: Some(path.into()),
            endpoint: None,
            api_key: None,
            max_requests_per_second: default_rps(),
            cache_path: default_cache_path(),
            max_attempts: default_attempts(),
            backoff_ms: default_backoff_ms(),
        }
    }

    pub fn remote(endpoint: impl Into<String>, cache_path: impl Into<PathBuf>) -> Self {
        TranslatorConfig {
            mode: TranslatorMode::Remote,
            glossary_path: None,
            endpoint: Some(endpoint.into()),
            cache_path: cache_path.into(),
            ..Self::glossary("")
        }
    }

    pub fn validate(&self) -> Result<(), TranslateError> {
        match self.mode {
            TranslatorMode::GlossaryStub if self.glossary_path.is_none() => {
                return Err(TranslateError::Config("glossary-stub mode requires glossary_path".into()))
            }
            TranslatorMode::Remote if self.endpoint.is_none() => {
                return Err(TranslateError::Config("remote mode requires endpoint".into()))
            }
            _ => {}
        }
        if !(self.max_requests_per_second > 0.0 && self.max_requests_per_second.is_finite()) {
            return Err(TranslateError::Config("max_requests_per_second must be positive".into()));
        }
        if self.max_attempts == 0 {
            return Err(TranslateError::Config("max_attempts must be at least 1".into()));
        }
        Ok(())
    }

    /// Fills `api_key` from the environment when the variable is set.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            if !key.is_empty() {
                self.api_key = Some(key);
            }
        }
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TranslateError {
    #[error("translator configuration: {0}")]
    Config(String),
    #[error("source and target language are both {0}")]
    SameLanguage(Language),
    #[error("remote translation failed after {attempts} attempt(s), HTTP status {}: {message}", status.map_or("none".to_string(), |s| s.to_string()))]
    Remote { status: Option<u16>, attempts: u32, message: String },
    #[error("translation cache {path}: {source}")]
    Cache { path: PathBuf, source: std::io::Error },
}

pub trait Translator: Send + Sync {
    fn translate(&self, text: &str, src: Language, dst: Language) -> Result<String, TranslateError>;
}

/// Fills the pivot fields of a non-English article. English and
/// already-pivoted articles come back unchanged.
pub fn pivot(article: &Article, translator: &dyn Translator) -> Result<Article, TranslateError> {
    if article.is_pivoted() {
        return Ok(article.clone());
    }
    let mut out = article.clone();
    out.pivot_title = Some(translator.translate(&article.title, article.language, Language::PIVOT)?);
    out.pivot_body = Some(translator.translate(&article.body, article.language, Language::PIVOT)?);
    Ok(out)
}

pub fn build_translator(cfg: &TranslatorConfig) -> Result<Box<dyn Translator>, TranslateError> {
    cfg.validate()?;
    Ok(match cfg.mode {
        TranslatorMode::GlossaryStub => {
            Box::new(GlossaryTranslator::new(load_glossary(cfg.glossary_path.as_deref().expect("validated"))?))
        }
        TranslatorMode::Remote => Box::new(RemoteTranslator::new(cfg, Box::new(HttpTransport::new()))?),
    })
}

/// `source_term<TAB>target_term` per line; blank lines and `#` comments skipped.
pub fn load_glossary(path: &Path) -> Result<Glossary, TranslateError> {
    let text = fs::read_to_string(path)
        .map_err(|e| TranslateError::Config(format!("cannot read glossary {}: {e}", path.display())))?;
    parse_glossary(&text).map_err(|line| TranslateError::Config(format!("{}: line {line} is not `term<TAB>translation`", path.display())))
}

fn parse_glossary(text: &str) -> Result<Glossary, usize> {
    let mut g = Glossary::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('\t') {
            Some((src, dst)) if !src.trim().is_empty() => g.insert(src.trim(), dst.trim()),
            _ => return Err(i + 1),
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Default)]
pub struct GlossaryTranslator {
    glossary: Glossary,
}

impl GlossaryTranslator {
    pub fn new(glossary: Glossary) -> Self {
        GlossaryTranslator { glossary }
    }
}

impl Translator for GlossaryTranslator {
    fn translate(&self, text: &str, src: Language, dst: Language) -> Result<String, TranslateError> {
        if src == dst {
            return Err(TranslateError::SameLanguage(src));
        }
        Ok(self.glossary.translate(text))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportResponse {
    pub status: u16,
    pub body: String,
}

/// The network boundary of the remote translator, replaceable in tests.
pub trait Transport: Send + Sync {
    /// `Err` means no HTTP response was received at all.
    fn post_json(&self, url: &str, body: &Value) -> Result<TransportResponse, String>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new() -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(20)))
            .build()
            .into();
        HttpTransport { agent }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, url: &str, body: &Value) -> Result<TransportResponse, String> {
        let mut resp = self.agent.post(url).send_json(body).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(TransportResponse { status, body })
    }
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    text: String,
}

/// In-memory map mirrored to an append-only JSONL file.
#[derive(Debug)]
struct TranslationCache {
    path: PathBuf,
    entries: HashMap<String, String>,
}

impl TranslationCache {
    fn open(path: &Path) -> Result<Self, TranslateError> {
        let mut entries = HashMap::new();
        match fs::read_to_string(path) {
            Ok(text) => {
                // A torn last line from an interrupted write only loses that entry.
                for line in text.lines() {
                    if let Ok(l) = serde_json::from_str::<CacheLine>(line) {
                        entries.insert(l.key, l.text);
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(source) => return Err(TranslateError::Cache { path: path.to_path_buf(), source }),
        }
        Ok(TranslationCache { path: path.to_path_buf(), entries })
    }

    fn insert(&mut self, key: String, text: String) -> Result<(), TranslateError> {
        let err = |source| TranslateError::Cache { path: self.path.clone(), source };
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(err)?;
        }
        let mut line = serde_json::to_string(&CacheLine { key: key.clone(), text: text.clone() }).expect("serializes");
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path).map_err(err)?;
        f.write_all(line.as_bytes()).map_err(err)?;
        self.entries.insert(key, text);
        Ok(())
    }
}

pub fn cache_key(text: &str, src: Language, dst: Language) -> String {
    format!("{}:{}:{}", hex_digest(text.as_bytes()), src, dst)
}

pub struct RemoteTranslator {
    endpoint: String,
    api_key: Option<String>,
    transport: Box<dyn Transport>,
    cache: Mutex<TranslationCache>,
    next_slot: Mutex<Option<Instant>>,
    min_interval: Duration,
    max_attempts: u32,
    backoff: Duration,
}

impl RemoteTranslator {
    pub fn new(cfg: &TranslatorConfig, transport: Box<dyn Transport>) -> Result<Self, TranslateError> {
        cfg.validate()?;
        let endpoint = cfg.endpoint.clone().ok_or_else(|| TranslateError::Config("remote mode requires endpoint".into()))?;
        Ok(RemoteTranslator {
            endpoint,
            api_key: cfg.api_key.clone(),
            transport,
            cache: Mutex::new(TranslationCache::open(&cfg.cache_path)?),
            next_slot: Mutex::new(None),
            min_interval: Duration::from_secs_f64(1.0 / cfg.max_requests_per_second),
            max_attempts: cfg.max_attempts,
            backoff: Duration::from_millis(cfg.backoff_ms),
        })
    }

    /// Blocks until the next request slot under the rate limit.
    fn wait_for_slot(&self) {
        let slot = {
            let mut next = self.next_slot.lock().expect("rate limiter lock");
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.min_interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }

    fn call(&self, text: &str, src: Language, dst: Language) -> Result<String, TranslateError> {
        let mut body = json!({ "q": text, "source": src.code(), "target": dst.code(), "format": "text" });
        if let Some(key) = &self.api_key {
            body["api_key"] = Value::String(key.clone());
        }
        let mut last_status = None;
        let mut last_message = String::new();
        for attempt in 1..=self.max_attempts {
            if attempt > 1 {
                thread::sleep(self.backoff * 2u32.pow(attempt - 2));
            }
            self.wait_for_slot();
            match self.transport.post_json(&self.endpoint, &body) {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    return parse_response(&resp.body).ok_or_else(|| TranslateError::Remote {
                        status: Some(resp.status),
                        attempts: attempt,
                        message: "response has no string field translatedText".into(),
                    });
                }
                Ok(resp) => {
                    last_status = Some(resp.status);
                    last_message = resp.body.chars().take(200).collect();
                    // Other client errors will not improve on retry.
                    if (400..500).contains(&resp.status) && resp.status != 408 && resp.status != 429 {
                        return Err(TranslateError::Remote { status: last_status, attempts: attempt, message: last_message });
                    }
                }
                Err(e) => {
                    last_status = None;
                    last_message = e;
                }
            }
        }
        Err(TranslateError::Remote { status: last_status, attempts: self.max_attempts, message: last_message })
    }
}

fn parse_response(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v.get("translatedText")?.as_str().map(String::from)
}

impl Translator for RemoteTranslator {
    fn translate(&self, text: &str, src: Language, dst: Language) -> Result<String, TranslateError> {
        if src == dst {
            return Err(TranslateError::SameLanguage(src));
        }
        if text.is_empty() {
            return Ok(String::new());
        }
        let key = cache_key(text, src, dst);
        if let Some(hit) = self.cache.lock().expect("cache lock").entries.get(&key) {
            return Ok(hit.clone());
        }
        // The lock is not held across the call; concurrent misses may both go out.
        let out = self.call(text, src, dst)?;
        self.cache.lock().expect("cache lock").insert(key, out.clone())?;
        Ok(out)
    }
}
