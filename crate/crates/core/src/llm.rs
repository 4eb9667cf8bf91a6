//! Language-model backends behind one completion interface.
//!
//! [`HttpBackend`] speaks the common chat-completions wire format
//! (`POST {base_url}/chat/completions`, answer in `choices[0].message.content`).
//! [`ScriptedBackend`] answers from a script table and built-in rules, so whole
//! corpora can be generated offline and reproduced byte for byte.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::graph::{ActionId, NodeId};
use crate::prompts::{humanize, RenderedPrompt, TemplateId, UNRECOGNIZED};

pub const API_KEY_ENV: &str = "GRAPHTOD_API_KEY";
pub const MAX_TOKENS_CEILING: u32 = 4096;
pub const DEFAULT_MAX_TOKENS: u32 = 512;
const INTENT_MAX_TOKENS: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
}

/// Routing metadata for a request. The HTTP backend ignores it; the scripted
/// backend keys its answers on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestTag {
    pub template: TemplateId,
    pub turn: u32,
    /// Node the dialogue is at when the prompt is rendered.
    pub node: Option<NodeId>,
    /// Node reached by the detected action (P3/P4).
    pub next_node: Option<NodeId>,
    /// P1: the action the user agent meant. P5: the action to express.
    pub action: Option<ActionId>,
    pub candidates: Vec<ActionId>,
    pub user_text: Option<String>,
}

impl RequestTag {
    pub fn new(template: TemplateId, turn: u32) -> Self {
        Self {
            template,
            turn,
            node: None,
            next_node: None,
            action: None,
            candidates: Vec::new(),
            user_text: None,
        }
    }

    pub fn at(mut self, node: &NodeId) -> Self {
        self.node = Some(node.clone());
        self
    }

    pub fn next(mut self, node: &NodeId) -> Self {
        self.next_node = Some(node.clone());
        self
    }

    pub fn action(mut self, action: Option<&ActionId>) -> Self {
        self.action = action.cloned();
        self
    }

    pub fn candidates<'a>(mut self, candidates: impl IntoIterator<Item = &'a ActionId>) -> Self {
        self.candidates = candidates.into_iter().cloned().collect();
        self
    }

    pub fn user_text(mut self, text: &str) -> Self {
        self.user_text = Some(text.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: RenderedPrompt,
    pub temperature: f32,
    pub max_tokens: u32,
    pub tag: RequestTag,
}

impl CompletionRequest {
    /// Request with the template's default decoding parameters.
    pub fn new(prompt: RenderedPrompt, tag: RequestTag) -> Self {
        let max_tokens = match tag.template {
            TemplateId::P1Intent => INTENT_MAX_TOKENS,
            _ => DEFAULT_MAX_TOKENS,
        };
        Self {
            prompt,
            temperature: tag.template.default_temperature(),
            max_tokens,
            tag,
        }
    }

    pub fn with_temperature(mut self, temperature: f32) -> Result<Self, BackendError> {
        if !(0.0..=2.0).contains(&temperature) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature {temperature} outside [0, 2]"
            )));
        }
        self.temperature = temperature;
        Ok(self)
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Result<Self, BackendError> {
        if max_tokens == 0 || max_tokens > MAX_TOKENS_CEILING {
            return Err(BackendError::InvalidRequest(format!(
                "max_tokens {max_tokens} outside 1..={MAX_TOKENS_CEILING}"
            )));
        }
        self.max_tokens = max_tokens;
        Ok(self)
    }
}

/// The language model as a function from prompt to text.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;

    fn kind(&self) -> &'static str;

    fn model(&self) -> Option<&str> {
        None
    }
}

/// 64-bit FNV-1a over the prompt messages.
pub fn prompt_digest(prompt: &RenderedPrompt) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for message in &prompt.messages {
        let role = serde_json::to_string(&message.role).expect("role serializes");
        for byte in role
            .bytes()
            .chain([0])
            .chain(message.content.bytes())
            .chain([0])
        {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(0x0100_0000_01b3);
        }
    }
    hash
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read script table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("script table is not a JSON object of strings: {0}")]
    Format(String),
    #[error("bad script key {key:?}: {reason}")]
    Key { key: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct ScriptKey {
    template: TemplateId,
    node: Option<String>,
    turn: Option<u32>,
}

/// Output overrides keyed by `templateId[:node][:turn]`; `*` in the node
/// position matches any node, and the key `*` replaces the global fallback.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptTable {
    entries: BTreeMap<ScriptKey, String>,
    fallback: Option<String>,
}

impl ScriptTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_json(text: &str) -> Result<Self, ScriptError> {
        let raw: BTreeMap<String, String> =
            serde_json::from_str(text).map_err(|e| ScriptError::Format(e.to_string()))?;
        let mut table = Self::new();
        for (key, value) in raw {
            table = table.with(&key, value)?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Add one override.
    pub fn with(mut self, key: &str, output: impl Into<String>) -> Result<Self, ScriptError> {
        if key == "*" {
            self.fallback = Some(output.into());
            return Ok(self);
        }
        let bad = |reason: &str| ScriptError::Key {
            key: key.to_string(),
            reason: reason.to_string(),
        };
        let mut parts = key.split(':');
        let template = parts
            .next()
            .and_then(TemplateId::parse)
            .ok_or_else(|| bad("unknown template id"))?;
        let node = match parts.next() {
            None | Some("*") => None,
            Some("") => return Err(bad("empty node")),
            Some(node) => Some(node.to_string()),
        };
        let turn = match parts.next() {
            None => None,
            Some(t) => Some(t.parse().map_err(|_| bad("turn must be an integer"))?),
        };
        if parts.next().is_some() {
            return Err(bad("too many components"));
        }
        self.entries.insert(
            ScriptKey {
                template,
                node,
                turn,
            },
            output.into(),
        );
        Ok(self)
    }

    fn lookup(&self, tag: &RequestTag) -> Option<&str> {
        let node = tag.node.as_ref().map(|n| n.to_string());
        let candidates = [
            (node.clone(), Some(tag.turn)),
            (None, Some(tag.turn)),
            (node, None),
            (None, None),
        ];
        candidates.into_iter().find_map(|(node, turn)| {
            self.entries
                .get(&ScriptKey {
                    template: tag.template,
                    node,
                    turn,
                })
                .map(String::as_str)
        })
    }
}

fn fallback_text(digest: u64) -> String {
    format!("(scripted reply {digest:016x})")
}

/// Resolve a scripted answer: table override, then the template's default
/// rule, then the global fallback.
pub fn scripted_rule(table: &ScriptTable, tag: &RequestTag, prompt_digest: u64) -> String {
    if let Some(out) = table.lookup(tag) {
        return out.to_string();
    }
    let node = tag.node.as_ref().map(|n| n.as_str()).unwrap_or("this step");
    let rule = match tag.template {
        TemplateId::P1Intent => tag
            .action
            .as_ref()
            .map(|a| a.to_string())
            .or_else(|| Some(match_user_text(tag))),
        TemplateId::P2Unrecognized => Some(format!(
            "Sorry, I did not understand that. We are still at {node}; what would you like to do?"
        )),
        TemplateId::P3End => Some(format!(
            "Everything is settled ({}). Thank you and goodbye!",
            tag.next_node.as_ref().map(|n| n.as_str()).unwrap_or(node)
        )),
        TemplateId::P4Continue => Some(format!(
            "Done. Let's continue with {}.",
            tag.next_node.as_ref().map(|n| n.as_str()).unwrap_or(node)
        )),
        TemplateId::P5User => tag
            .action
            .as_ref()
            .map(|a| format!("I would like to do this: {a}.")),
        TemplateId::P6Prefs => None,
    };
    rule.unwrap_or_else(|| {
        table
            .fallback
            .clone()
            .unwrap_or_else(|| fallback_text(prompt_digest))
    })
}

/// Intent detection without a ground truth (a human at the keyboard): the
/// first candidate named in the text, by identifier or by all of its words.
fn match_user_text(tag: &RequestTag) -> String {
    let text = tag.user_text.as_deref().unwrap_or("").to_lowercase();
    let words: Vec<&str> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect();
    tag.candidates
        .iter()
        .find(|a| {
            text.contains(&a.as_str().to_lowercase())
                || humanize(a.as_str())
                    .split_whitespace()
                    .all(|w| words.contains(&w))
        })
        .map(|a| a.to_string())
        .unwrap_or_else(|| UNRECOGNIZED.to_string())
}

/// Deterministic stand-in for a language model.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    table: ScriptTable,
    seed: u64,
}

impl ScriptedBackend {
    pub fn new(table: ScriptTable, seed: u64) -> Self {
        Self { table, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn table(&self) -> &ScriptTable {
        &self.table
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        Ok(scripted_rule(
            &self.table,
            &request.tag,
            prompt_digest(&request.prompt),
        ))
    }

    fn kind(&self) -> &'static str {
        "scripted"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retries: u32,
    pub backoff_base: Duration,
    pub max_concurrency: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4".into(),
            api_key: None,
            timeout: Duration::from_secs(60),
            retries: 3,
            backoff_base: Duration::from_millis(500),
            max_concurrency: 4,
        }
    }
}

/// Counting semaphore for in-flight requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("gate lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate lock");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate lock") += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [crate::prompts::Message],
    temperature: f32,
    max_tokens: u32,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(BackendError),
}

/// Chat-completions client with retries and an in-flight cap.
#[derive(Debug)]
pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
    gate: Gate,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Ok(Self {
            gate: Gate::new(config.max_concurrency),
            config,
            client,
        })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }

    fn attempt(&self, body: &WireRequest<'_>) -> Attempt {
        let mut request = self.client.post(self.endpoint()).json(body);
        if let Some(key) = &self.config.api_key {
            request = request.bearer_auth(key);
        }
        let response = match request.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() || e.is_connect() || e.is_request() => {
                return Attempt::Retry(e.to_string())
            }
            Err(e) => return Attempt::Fatal(BackendError::Unavailable(e.to_string())),
        };
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Retry(format!("status {status}"));
        }
        if !status.is_success() {
            return Attempt::Fatal(BackendError::Unavailable(format!("status {status}")));
        }
        let body: Value = match response.json() {
            Ok(v) => v,
            Err(e) if e.is_timeout() => return Attempt::Retry(e.to_string()),
            Err(e) => return Attempt::Fatal(BackendError::MalformedResponse(e.to_string())),
        };
        match body
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
        {
            Some(text) => Attempt::Done(text.to_string()),
            None => Attempt::Fatal(BackendError::MalformedResponse(
                "no choices[0].message.content".into(),
            )),
        }
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let body = WireRequest {
            model: &self.config.model,
            messages: &request.prompt.messages,
            temperature: request.temperature,
            max_tokens: request.max_tokens.min(MAX_TOKENS_CEILING),
        };
        let _permit = self.gate.acquire();
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(reason) => {
                    log::warn!("completion attempt {} failed: {reason}", attempt + 1);
                    last = reason;
                    if attempt < self.config.retries {
                        std::thread::sleep(self.config.backoff_base * 2u32.saturating_pow(attempt));
                    }
                }
            }
        }
        Err(BackendError::Unavailable(format!(
            "{} attempt(s) failed, last: {last}",
            self.config.retries + 1
        )))
    }

    fn kind(&self) -> &'static str {
        "http"
    }

    fn model(&self) -> Option<&str> {
        Some(&self.config.model)
    }
}
