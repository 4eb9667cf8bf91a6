//! Function-call execution and the system agent's knowledge database.

use std::sync::OnceLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::graph::{ActionId, FixtureData, FunctionCallSpec, FunctionHandler, HttpMethod, NodeId};
use crate::persona::Persona;

pub const HTTP_TIMEOUT: Duration = Duration::from_secs(10);

/// What one function call returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiResult {
    pub action: ActionId,
    pub request_summary: String,
    pub payload: Value,
    pub turn_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KnowledgeError {
    #[error("turn index {got} does not follow the last stored turn {last}")]
    NonMonotoneTurn { last: u32, got: u32 },
}

/// Append-only log of API results, ordered by strictly increasing turn.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeDatabase {
    entries: Vec<ApiResult>,
}

impl KnowledgeDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Store `result` and return its index.
    pub fn append(&mut self, result: ApiResult) -> Result<usize, KnowledgeError> {
        if let Some(last) = self.entries.last() {
            if result.turn_index <= last.turn_index {
                return Err(KnowledgeError::NonMonotoneTurn {
                    last: last.turn_index,
                    got: result.turn_index,
                });
            }
        }
        self.entries.push(result);
        Ok(self.entries.len() - 1)
    }

    /// The last `min(n, len)` entries, oldest first.
    pub fn recent(&self, n: usize) -> &[ApiResult] {
        &self.entries[self.entries.len().saturating_sub(n)..]
    }

    pub fn entries(&self) -> &[ApiResult] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> Option<&ApiResult> {
        self.entries.get(index)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Dialogue state a handler may draw request parameters from.
#[derive(Debug, Clone, Copy)]
pub struct InvocationContext<'a> {
    pub node: &'a NodeId,
    pub persona: &'a Persona,
    pub user_utterance: &'a str,
    pub turn: u32,
}

#[derive(Debug, Error)]
pub enum FunctionCallError {
    #[error("fixture data for {0} is not loaded")]
    FixtureMissing(String),
    #[error("http call {name} failed: {reason}")]
    HttpFailure { name: String, reason: String },
    #[error("response of {name} is not valid JSON: {reason}")]
    PayloadUndecodable { name: String, reason: String },
}

/// Runs function calls. Holds the HTTP client used by `http` handlers.
#[derive(Debug, Default)]
pub struct Invoker {
    client: OnceLock<reqwest::blocking::Client>,
}

impl Invoker {
    pub fn new() -> Self {
        Self::default()
    }

    fn client(&self) -> &reqwest::blocking::Client {
        self.client.get_or_init(|| {
            reqwest::blocking::Client::builder()
                .timeout(HTTP_TIMEOUT)
                .build()
                .expect("http client builds")
        })
    }

    pub fn invoke(
        &self,
        spec: &FunctionCallSpec,
        action: &ActionId,
        ctx: &InvocationContext<'_>,
    ) -> Result<ApiResult, FunctionCallError> {
        let (request_summary, payload) = match &spec.handler {
            FunctionHandler::Fixture { filter, data, .. } => {
                let FixtureData::Loaded(records) = data else {
                    return Err(FunctionCallError::FixtureMissing(spec.name.clone()));
                };
                let (selection, applied) = filter_records(records, filter, ctx);
                (summarize(&spec.name, &applied), Value::Array(selection))
            }
            FunctionHandler::Http { url, method } => {
                let url = fill_url(url, action, ctx);
                let payload = self.call_http(&spec.name, &url, *method, action, ctx)?;
                (format!("{method} {url}"), payload)
            }
        };
        Ok(ApiResult {
            action: action.clone(),
            request_summary,
            payload,
            turn_index: ctx.turn,
        })
    }

    fn call_http(
        &self,
        name: &str,
        url: &str,
        method: HttpMethod,
        action: &ActionId,
        ctx: &InvocationContext<'_>,
    ) -> Result<Value, FunctionCallError> {
        let failure = |reason: String| FunctionCallError::HttpFailure {
            name: name.to_string(),
            reason,
        };
        let request = match method {
            HttpMethod::Get => self.client().get(url),
            HttpMethod::Post => self.client().post(url).json(&serde_json::json!({
                "action": action,
                "node": ctx.node,
                "turn": ctx.turn,
                "utterance": ctx.user_utterance,
                "persona": ctx.persona,
            })),
        };
        let response = request.send().map_err(|e| failure(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(failure(format!("status {status}")));
        }
        let body = response.text().map_err(|e| failure(e.to_string()))?;
        serde_json::from_str(&body).map_err(|e| FunctionCallError::PayloadUndecodable {
            name: name.to_string(),
            reason: e.to_string(),
        })
    }
}

fn summarize(name: &str, applied: &[(String, Vec<String>)]) -> String {
    let args: Vec<String> = applied
        .iter()
        .map(|(field, values)| format!("{field}={}", values.join("|")))
        .collect();
    format!("{name}({})", args.join(", "))
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Whole-word, case-insensitive phrase match.
fn mentions(haystack: &[String], phrase: &str) -> bool {
    let needle = words(phrase);
    !needle.is_empty()
        && haystack
            .windows(needle.len())
            .any(|w| w == needle.as_slice())
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Keep the records whose `filter` fields match a value mentioned in the
/// persona preferences or the user utterance. Fields with no mentioned value
/// do not constrain the selection.
fn filter_records(
    records: &[Map<String, Value>],
    filter: &[String],
    ctx: &InvocationContext<'_>,
) -> (Vec<Value>, Vec<(String, Vec<String>)>) {
    let mut text = ctx.persona.prefs.join(" . ");
    text.push_str(" . ");
    text.push_str(ctx.user_utterance);
    let haystack = words(&text);

    let mut applied = Vec::new();
    for field in filter {
        let mut values: Vec<String> = records
            .iter()
            .filter_map(|r| r.get(field).and_then(scalar_text))
            .collect();
        values.sort();
        values.dedup();
        let chosen: Vec<String> = values
            .into_iter()
            .filter(|v| mentions(&haystack, v))
            .collect();
        if !chosen.is_empty() {
            applied.push((field.clone(), chosen));
        }
    }

    let selection = records
        .iter()
        .filter(|r| {
            applied.iter().all(|(field, chosen)| {
                r.get(field)
                    .and_then(scalar_text)
                    .is_some_and(|v| chosen.contains(&v))
            })
        })
        .map(|r| Value::Object(r.clone()))
        .collect();
    (selection, applied)
}

/// Percent-encode for use anywhere in a URL. Form encoding writes spaces as
/// `+`, which is only a space in query strings; a literal `+` comes out as `%2B`,
/// so every remaining `+` is a space.
fn encode(value: &str) -> String {
    url::form_urlencoded::byte_serialize(value.as_bytes())
        .collect::<String>()
        .replace('+', "%20")
}

/// Expand `{node}`, `{action}`, `{turn}`, `{utterance}` and `{persona.*}`
/// placeholders. Unknown placeholders are left untouched.
fn fill_url(template: &str, action: &ActionId, ctx: &InvocationContext<'_>) -> String {
    let persona = ctx.persona;
    let bindings = [
        ("{node}", ctx.node.to_string()),
        ("{action}", action.to_string()),
        ("{turn}", ctx.turn.to_string()),
        ("{utterance}", ctx.user_utterance.to_string()),
        ("{persona.name}", persona.name.clone()),
        ("{persona.age}", persona.age.to_string()),
        ("{persona.gender}", persona.gender.to_string()),
        ("{persona.prefs}", persona.prefs.join("; ")),
    ];
    bindings
        .iter()
        .fold(template.to_string(), |url, (key, value)| {
            url.replace(key, &encode(value))
        })
}
