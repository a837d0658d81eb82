//! LLM-backed detection: chat-completion transport, response cache, retries
//! and order-preserving batch execution.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{sha256_hex, Candidate, DetectorId, SmellKind, Verdict};
use crate::prompt::{parse_reply, render, smell_of_prompt, ParsedReply, PromptTemplate, RenderedPrompt};

fn default_temperature() -> f64 {
    1.0
}
fn default_max_output_chars() -> usize {
    1500
}
fn default_max_retries() -> u32 {
    3
}
fn default_timeout() -> u64 {
    120
}
fn default_context_window() -> usize {
    128_000
}
fn default_backoff_ms() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Detector name used in verdicts and reports.
    pub name: String,
    pub endpoint_url: String,
    /// Model identifier sent on the wire; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Environment variable holding the API key. Keys never live in config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_output_chars")]
    pub max_output_chars: usize,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Seconds.
    #[serde(default = "default_timeout")]
    pub request_timeout: u64,
    /// Tokens.
    #[serde(default = "default_context_window")]
    pub context_window: usize,
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
}

impl ModelConfig {
    pub fn new(name: impl Into<String>, endpoint_url: impl Into<String>) -> Self {
        ModelConfig {
            name: name.into(),
            endpoint_url: endpoint_url.into(),
            model: None,
            api_key_env: None,
            temperature: default_temperature(),
            max_output_chars: default_max_output_chars(),
            max_retries: default_max_retries(),
            request_timeout: default_timeout(),
            context_window: default_context_window(),
            backoff_base_ms: default_backoff_ms(),
        }
    }

    pub fn wire_model(&self) -> &str {
        self.model.as_deref().unwrap_or(&self.name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Validation("model name is empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::Validation(format!("{}: temperature {} out of range", self.name, self.temperature)));
        }
        if self.max_output_chars == 0 || self.context_window == 0 {
            return Err(Error::Validation(format!("{}: output and context limits must be positive", self.name)));
        }
        Ok(())
    }
}

/// Failure of a single backend call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallError {
    pub retryable: bool,
    pub message: String,
}

impl CallError {
    pub fn retryable(message: impl Into<String>) -> Self {
        CallError {
            retryable: true,
            message: message.into(),
        }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        CallError {
            retryable: false,
            message: message.into(),
        }
    }

    /// HTTP status classification: 408, 429 and 5xx are worth retrying.
    pub fn from_status(status: u16, body: &str) -> Self {
        let message = format!("HTTP {status}: {}", body.chars().take(200).collect::<String>());
        CallError {
            retryable: status == 408 || status == 429 || status >= 500,
            message,
        }
    }
}

/// Something that turns a prompt into a reply.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, model: &ModelConfig, prompt: &str) -> std::result::Result<String, CallError>;
}

/// Chat-completions over HTTP: one user message carrying the whole prompt.
pub struct HttpBackend {
    agent: ureq::Agent,
}

impl Default for HttpBackend {
    fn default() -> Self {
        HttpBackend {
            agent: ureq::AgentBuilder::new().build(),
        }
    }
}

pub fn chat_request_body(model: &ModelConfig, prompt: &str) -> serde_json::Value {
    serde_json::json!({
        "model": model.wire_model(),
        "messages": [{ "role": "user", "content": prompt }],
        "temperature": model.temperature,
    })
}

/// Pulls `choices[0].message.content` out of a chat-completions response.
pub fn reply_from_response(body: &serde_json::Value) -> std::result::Result<String, CallError> {
    body.pointer("/choices/0/message/content")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| CallError::fatal("response has no choices[0].message.content"))
}

impl ChatBackend for HttpBackend {
    fn complete(&self, model: &ModelConfig, prompt: &str) -> std::result::Result<String, CallError> {
        let mut request = self
            .agent
            .post(&model.endpoint_url)
            .timeout(Duration::from_secs(model.request_timeout))
            .set("Content-Type", "application/json");
        if let Some(var) = &model.api_key_env {
            let key = std::env::var(var)
                .map_err(|_| CallError::fatal(format!("environment variable {var} is not set")))?;
            request = request.set("Authorization", &format!("Bearer {key}"));
        }
        match request.send_json(chat_request_body(model, prompt)) {
            Ok(response) => {
                let body: serde_json::Value = response
                    .into_json()
                    .map_err(|e| CallError::retryable(format!("unreadable response body: {e}")))?;
                reply_from_response(&body)
            }
            Err(ureq::Error::Status(status, response)) => {
                let body = response.into_string().unwrap_or_default();
                Err(CallError::from_status(status, &body))
            }
            Err(ureq::Error::Transport(t)) => Err(CallError::retryable(t.to_string())),
        }
    }
}

/// Offline backend whose reply is a pure function of (model, prompt).
///
/// Roughly one reply in sixteen ignores the answer protocol so the abstain
/// path is exercised; the rest split between the YES and NO prefixes.
#[derive(Debug, Default)]
pub struct MockBackend {
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reply_for(model: &str, prompt: &str) -> String {
        let digest = Sha256::new()
            .chain_update(model.as_bytes())
            .chain_update([0u8])
            .chain_update(prompt.as_bytes())
            .finalize();
        let tag = hex::encode(&digest[..4]);
        let Some(smell) = smell_of_prompt(prompt) else {
            return format!("I could not identify which smell to look for ({tag}).");
        };
        let name = smell.display_name();
        if digest[0] % 16 == 0 {
            format!("It is hard to say whether this is {name}; more context is needed ({tag}).")
        } else if digest[1] % 2 == 0 {
            format!("YES, I found {name}. Mock analysis {tag} flagged the symptoms.")
        } else {
            format!("NO, I did not find {name}. Mock analysis {tag} saw no symptoms.")
        }
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, model: &ModelConfig, prompt: &str) -> std::result::Result<String, CallError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(Self::reply_for(&model.name, prompt))
    }
}

/// Backend defined by a closure, for scripted tests.
pub struct FnBackend<F>(pub F);

impl<F> ChatBackend for FnBackend<F>
where
    F: Fn(&ModelConfig, &str) -> std::result::Result<String, CallError> + Send + Sync,
{
    fn complete(&self, model: &ModelConfig, prompt: &str) -> std::result::Result<String, CallError> {
        (self.0)(model, prompt)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub model: String,
    pub prompt_sha256: String,
    pub reply_text: String,
    pub timestamp: u64,
    pub decision: ParsedReply,
}

pub fn cache_key(model_name: &str, prompt: &str) -> String {
    let mut hasher = Sha256::new();
    for part in [model_name.as_bytes(), prompt.as_bytes()] {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    hex::encode(hasher.finalize())
}

/// Content-addressed reply cache. Lookups for one key are serialized so a
/// key is fetched at most once even under concurrency.
#[derive(Debug, Default)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, CacheEntry>>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Self {
        ResponseCache {
            dir: Some(dir.into()),
            ..Self::default()
        }
    }

    fn path_for(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(&key[..2]).join(format!("{key}.json")))
    }

    fn load(&self, key: &str) -> Result<Option<CacheEntry>> {
        if let Some(hit) = self.memory.lock().unwrap().get(key) {
            return Ok(Some(hit.clone()));
        }
        let Some(path) = self.path_for(key) else { return Ok(None) };
        if !path.exists() {
            return Ok(None);
        }
        let text = crate::io::read_text(&path)?;
        let entry: CacheEntry = serde_json::from_str(&text).map_err(|e| Error::Parse {
            source_name: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if entry.key != key {
            return Err(Error::Validation(format!("cache file {} holds key {}", path.display(), entry.key)));
        }
        self.memory.lock().unwrap().insert(key.to_string(), entry.clone());
        Ok(Some(entry))
    }

    fn store(&self, entry: &CacheEntry) -> Result<()> {
        if let Some(path) = self.path_for(&entry.key) {
            let parent = path.parent().expect("cache path has a parent");
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            let tmp = path.with_extension("json.tmp");
            let text = serde_json::to_string_pretty(entry).expect("serializable cache entry");
            std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
            std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        }
        self.memory.lock().unwrap().insert(entry.key.clone(), entry.clone());
        Ok(())
    }

    /// Returns the cached entry for `key`, or runs `fetch` and caches its
    /// result. The flag is true on a hit.
    pub fn get_or_fetch(&self, key: &str, fetch: impl FnOnce() -> Result<CacheEntry>) -> Result<(CacheEntry, bool)> {
        let lock = self
            .locks
            .lock()
            .unwrap()
            .entry(key.to_string())
            .or_default()
            .clone();
        let _guard = lock.lock().unwrap();
        if let Some(hit) = self.load(key)? {
            return Ok((hit, true));
        }
        let entry = fetch()?;
        self.store(&entry)?;
        Ok((entry, false))
    }
}

/// First `max` characters of `text`.
pub fn truncate_chars(text: &str, max: usize) -> &str {
    match text.char_indices().nth(max) {
        Some((i, _)) => &text[..i],
        None => text,
    }
}

/// Delay before retry number `attempt` (1-based): exponential from the
/// model's base, capped at 30 s, with jitter over the upper half.
pub fn backoff_delay(base_ms: u64, attempt: u32) -> Duration {
    let exp = base_ms.saturating_mul(1u64 << attempt.saturating_sub(1).min(16)).min(30_000);
    if exp == 0 {
        return Duration::ZERO;
    }
    let jittered = rand::thread_rng().gen_range(exp / 2..=exp);
    Duration::from_millis(jittered)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub candidate_id: String,
    pub model: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BatchOutcome {
    pub verdicts: Vec<Verdict>,
    pub failures: Vec<FailureRecord>,
}

pub struct LlmDetector {
    backend: Arc<dyn ChatBackend>,
    cache: ResponseCache,
}

impl LlmDetector {
    pub fn new(backend: Arc<dyn ChatBackend>, cache: ResponseCache) -> Self {
        LlmDetector { backend, cache }
    }

    pub fn detect(&self, candidate: &Candidate, template: &PromptTemplate, model: &ModelConfig) -> Result<Verdict> {
        let prompt = render(template, candidate)?;
        self.detect_prompt(&prompt, model)
    }

    pub fn detect_prompt(&self, prompt: &RenderedPrompt, model: &ModelConfig) -> Result<Verdict> {
        if prompt.token_estimate > model.context_window {
            return Err(Error::Capacity {
                model: model.name.clone(),
                estimate: prompt.token_estimate,
                limit: model.context_window,
            });
        }
        let key = cache_key(&model.name, &prompt.text);
        let (entry, _hit) = self.cache.get_or_fetch(&key, || {
            let reply = self.call_with_retry(model, &prompt.text)?;
            let reply_text = truncate_chars(&reply, model.max_output_chars).to_string();
            let decision = parse_reply(prompt.smell, &reply_text);
            let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            Ok(CacheEntry {
                key: key.clone(),
                model: model.name.clone(),
                prompt_sha256: sha256_hex(prompt.text.as_bytes()),
                reply_text,
                timestamp,
                decision,
            })
        })?;
        Ok(verdict_from_entry(model, &prompt.candidate_id, &entry))
    }

    fn call_with_retry(&self, model: &ModelConfig, prompt: &str) -> Result<String> {
        let mut attempt = 0;
        loop {
            match self.backend.complete(model, prompt) {
                Ok(reply) => return Ok(reply),
                Err(err) => {
                    attempt += 1;
                    if !err.retryable || attempt > model.max_retries {
                        return Err(Error::Transport(format!(
                            "{} failed after {attempt} attempt(s): {}",
                            model.name, err.message
                        )));
                    }
                    std::thread::sleep(backoff_delay(model.backoff_base_ms, attempt));
                }
            }
        }
    }

    /// Runs every (prompt, model) pair, `parallelism` at a time. Output
    /// order is prompt order, then model order, whatever the completion
    /// order; failed pairs are reported instead of aborting the batch.
    pub fn batch_prompts(&self, prompts: &[RenderedPrompt], models: &[ModelConfig], parallelism: usize) -> Result<BatchOutcome> {
        if parallelism == 0 {
            return Err(Error::Usage("parallelism must be at least 1".into()));
        }
        let jobs: Vec<(&RenderedPrompt, &ModelConfig)> =
            prompts.iter().flat_map(|p| models.iter().map(move |m| (p, m))).collect();
        let results: Vec<Mutex<Option<Result<Verdict>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..parallelism.min(jobs.len().max(1)) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some((prompt, model)) = jobs.get(i) else { break };
                    let outcome = self.detect_prompt(prompt, model);
                    *results[i].lock().unwrap() = Some(outcome);
                });
            }
        });
        let mut outcome = BatchOutcome::default();
        for ((prompt, model), slot) in jobs.iter().zip(results) {
            match slot.into_inner().unwrap().expect("every job ran") {
                Ok(v) => outcome.verdicts.push(v),
                Err(e) => outcome.failures.push(FailureRecord {
                    candidate_id: prompt.candidate_id.clone(),
                    model: model.name.clone(),
                    kind: e.kind().to_string(),
                    message: e.to_string(),
                }),
            }
        }
        Ok(outcome)
    }

    /// Renders each candidate with its smell's template, then batches.
    /// Rendering failures become failure records for every model.
    pub fn batch_detect(
        &self,
        candidates: &[Candidate],
        templates: &BTreeMap<SmellKind, PromptTemplate>,
        models: &[ModelConfig],
        parallelism: usize,
    ) -> Result<BatchOutcome> {
        let mut prompts = Vec::new();
        let mut render_failures = Vec::new();
        for c in candidates {
            let rendered = templates
                .get(&c.smell)
                .ok_or_else(|| Error::Contract(format!("no template for {}", c.smell)))
                .and_then(|t| render(t, c));
            match rendered {
                Ok(p) => prompts.push(p),
                Err(e) => render_failures.extend(models.iter().map(|m| FailureRecord {
                    candidate_id: c.id.clone(),
                    model: m.name.clone(),
                    kind: e.kind().to_string(),
                    message: e.to_string(),
                })),
            }
        }
        let mut outcome = self.batch_prompts(&prompts, models, parallelism)?;
        outcome.failures.extend(render_failures);
        Ok(outcome)
    }
}

fn verdict_from_entry(model: &ModelConfig, candidate_id: &str, entry: &CacheEntry) -> Verdict {
    Verdict {
        detector: DetectorId::llm(&model.name),
        candidate_id: candidate_id.to_string(),
        decision: entry.decision.decision,
        rationale: Some(entry.decision.rationale.clone()),
        raw_response_digest: Some(sha256_hex(entry.reply_text.as_bytes())),
    }
}
