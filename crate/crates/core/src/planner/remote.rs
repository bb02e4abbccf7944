//! Chat-completions backend with tool calling.
//!
//! The wire layer is a [`ChatTransport`], so tests replay recorded exchanges
//! through [`ReplayTransport`] without touching the network.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::{assemble_prompt, derive_tool_schema, Backend, BackendConfig, PlannerError, PlannerRequest, RawOutcome};
use super::{API_KEY_ENV, SUBMIT_PLAN};
use crate::dsl::{Api, Call, FunctionRecord};
use crate::synthesis::{NameDoc, NameDocProvider, NamingRequest};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("replay mismatch: {0}")]
    Replay(String),
}

impl From<TransportError> for PlannerError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::Status { code: 401 | 403, .. } => PlannerError::BackendUnavailable(format!(
                "{e}; check that {API_KEY_ENV} (or the configured key variable) holds a valid credential"
            )),
            other => PlannerError::BackendUnavailable(other.to_string()),
        }
    }
}

/// Posts one JSON request body and returns the JSON response body.
pub trait ChatTransport: Send + Sync {
    fn post(&self, body: &Value) -> Result<Value, TransportError>;
}

#[cfg(feature = "http")]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    key: String,
}

#[cfg(feature = "http")]
impl HttpTransport {
    pub fn new(cfg: &BackendConfig) -> Result<Self, PlannerError> {
        let endpoint = cfg.endpoint.clone().ok_or_else(|| PlannerError::Config("missing endpoint".into()))?;
        let key = std::env::var(&cfg.api_key_env).map_err(|_| {
            PlannerError::BackendUnavailable(format!("credential variable {} is not set", cfg.api_key_env))
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| PlannerError::BackendUnavailable(e.to_string()))?;
        Ok(HttpTransport { client, endpoint, key })
    }
}

#[cfg(feature = "http")]
impl ChatTransport for HttpTransport {
    fn post(&self, body: &Value) -> Result<Value, TransportError> {
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.key)
            .json(body)
            .send()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| TransportError::Network(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError::Status { code: status.as_u16(), body: text });
        }
        serde_json::from_str(&text).map_err(|e| TransportError::Network(format!("response is not JSON: {e}")))
    }
}

#[cfg(feature = "http")]
pub fn http_transport(cfg: &BackendConfig) -> Result<Arc<dyn ChatTransport>, PlannerError> {
    Ok(Arc::new(HttpTransport::new(cfg)?))
}

#[cfg(not(feature = "http"))]
pub fn http_transport(_cfg: &BackendConfig) -> Result<Arc<dyn ChatTransport>, PlannerError> {
    Err(PlannerError::Config("built without the `http` feature".into()))
}

/// One recorded request/response pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: Value,
    #[serde(default = "ok_status")]
    pub status: u16,
    pub response: Value,
}

fn ok_status() -> u16 {
    200
}

/// Serves recorded exchanges in order and checks each request against the
/// recorded one.
#[derive(Default)]
pub struct ReplayTransport {
    queue: Mutex<VecDeque<Exchange>>,
}

impl ReplayTransport {
    pub fn new(exchanges: impl IntoIterator<Item = Exchange>) -> Self {
        ReplayTransport { queue: Mutex::new(exchanges.into_iter().collect()) }
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("replay queue poisoned").len()
    }
}

impl ChatTransport for ReplayTransport {
    fn post(&self, body: &Value) -> Result<Value, TransportError> {
        let next = self.queue.lock().expect("replay queue poisoned").pop_front();
        let exchange = next.ok_or_else(|| TransportError::Replay("no recorded exchange left".into()))?;
        if &exchange.request != body {
            return Err(TransportError::Replay("request differs from the recording".into()));
        }
        if !(200..300).contains(&exchange.status) {
            return Err(TransportError::Status { code: exchange.status, body: exchange.response.to_string() });
        }
        Ok(exchange.response)
    }
}

pub struct RemotePlanner {
    transport: Arc<dyn ChatTransport>,
    model: String,
    temperature: f64,
}

impl RemotePlanner {
    pub fn new(transport: Arc<dyn ChatTransport>, cfg: &BackendConfig) -> Self {
        RemotePlanner {
            transport,
            model: cfg.model.clone().unwrap_or_default(),
            temperature: cfg.temperature,
        }
    }

    pub fn build_request_body(&self, request: &PlannerRequest, corrections: &[String]) -> Value {
        let mut messages = vec![json!({ "role": "system", "content": assemble_prompt(request) })];
        messages.extend(corrections.iter().map(|c| json!({ "role": "user", "content": c })));
        json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": messages,
            "tools": derive_tool_schema(&request.api),
            "tool_choice": "auto",
        })
    }
}

fn first_message(response: &Value) -> Result<&Value, PlannerError> {
    response
        .pointer("/choices/0/message")
        .ok_or_else(|| PlannerError::MalformedToolCall("response has no choices[0].message".into()))
}

fn tool_arguments(call: &Value) -> Result<(String, Value), PlannerError> {
    let name = call
        .pointer("/function/name")
        .and_then(Value::as_str)
        .ok_or_else(|| PlannerError::MalformedToolCall("tool call without a function name".into()))?;
    let args = match call.pointer("/function/arguments") {
        Some(Value::String(s)) if s.trim().is_empty() => json!({}),
        Some(Value::String(s)) => serde_json::from_str(s)
            .map_err(|e| PlannerError::MalformedToolCall(format!("arguments of `{name}` are not JSON: {e}")))?,
        Some(v @ Value::Object(_)) => v.clone(),
        None => json!({}),
        Some(other) => {
            return Err(PlannerError::MalformedToolCall(format!("arguments of `{name}` must be an object, got {other}")))
        }
    };
    Ok((name.to_string(), args))
}

fn string_list(v: &Value, what: &str) -> Result<Vec<String>, PlannerError> {
    v.as_array()
        .ok_or_else(|| PlannerError::MalformedToolCall(format!("{what} must be an array")))?
        .iter()
        .map(|a| a.as_str().map(str::to_string).ok_or_else(|| PlannerError::MalformedToolCall(format!("{what} must hold strings"))))
        .collect()
}

fn decode_tool_call(name: &str, args: &Value, api: &Api) -> Result<Vec<Call>, PlannerError> {
    let obj = args
        .as_object()
        .ok_or_else(|| PlannerError::MalformedToolCall(format!("arguments of `{name}` must be an object")))?;
    if name == SUBMIT_PLAN {
        let calls = obj
            .get("calls")
            .and_then(Value::as_array)
            .ok_or_else(|| PlannerError::MalformedToolCall("submit_plan needs a `calls` array".into()))?;
        return calls
            .iter()
            .map(|c| {
                let function = c
                    .get("function")
                    .and_then(Value::as_str)
                    .ok_or_else(|| PlannerError::MalformedToolCall("call without `function`".into()))?;
                let args = match c.get("args") {
                    Some(a) => string_list(a, "call args")?,
                    None => vec![],
                };
                Ok(Call { function: function.to_string(), args })
            })
            .collect();
    }
    let Some(def) = api.get(name) else {
        // Let validation report the unknown name so the retry loop can correct it.
        let args: Vec<String> = obj.values().filter_map(Value::as_str).map(str::to_string).collect();
        return Ok(vec![Call { function: name.to_string(), args }]);
    };
    if let Some(extra) = obj.keys().find(|k| !def.signature.param_names().any(|p| p == k.as_str())) {
        return Err(PlannerError::MalformedToolCall(format!("`{name}` has no parameter `{extra}`")));
    }
    let args = def
        .signature
        .param_names()
        .map(|p| {
            obj.get(p)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| PlannerError::MalformedToolCall(format!("`{name}` is missing string argument `{p}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(vec![Call { function: name.to_string(), args }])
}

/// Maps a chat-completions response onto a raw planner outcome.
pub fn decode_response(response: &Value, api: &Api) -> Result<RawOutcome, PlannerError> {
    let message = first_message(response)?;
    if let Some(calls) = message.get("tool_calls").and_then(Value::as_array).filter(|c| !c.is_empty()) {
        let mut plan = Vec::new();
        for call in calls {
            let (name, args) = tool_arguments(call)?;
            plan.extend(decode_tool_call(&name, &args, api)?);
        }
        return Ok(RawOutcome::Calls(plan));
    }
    let content = message.get("content").and_then(Value::as_str).unwrap_or("").trim();
    if content.trim_end_matches('.').eq_ignore_ascii_case("done") {
        return Ok(RawOutcome::Done);
    }
    if content.is_empty() {
        return Err(PlannerError::MalformedToolCall("empty response with no tool calls".into()));
    }
    if content.contains('(') && crate::dsl::Plan::parse_syntax(content).is_ok() {
        return Ok(RawOutcome::PlanText(content.to_string()));
    }
    Ok(RawOutcome::Clarification(content.to_string()))
}

impl Backend for RemotePlanner {
    fn propose(&self, request: &PlannerRequest, corrections: &[String]) -> Result<RawOutcome, PlannerError> {
        let body = self.build_request_body(request, corrections);
        let response = self.transport.post(&body)?;
        decode_response(&response, &request.api)
    }
}

/// Name-and-docstring provider backed by the same chat endpoint.
pub struct ChatNamer {
    transport: Arc<dyn ChatTransport>,
    model: String,
}

pub const NAME_FUNCTION: &str = "name_function";

impl ChatNamer {
    pub fn new(transport: Arc<dyn ChatTransport>, cfg: &BackendConfig) -> Self {
        ChatNamer { transport, model: cfg.model.clone().unwrap_or_default() }
    }

    pub fn build_request_body(&self, request: &NamingRequest<'_>) -> Value {
        let prompt = format!(
            "A user taught a robot a new skill by saying {:?} and then demonstrating: {}.\n\
             The generalized body is: {}\n\
             Parameters stand for: {}.\n\
             Choose a short snake_case function name and a one-sentence docstring.",
            request.utterance,
            request.decomposition,
            request.body,
            if request.lifted_ids.is_empty() { "none".to_string() } else { request.lifted_ids.join(", ") },
        );
        json!({
            "model": self.model,
            "temperature": 0.0,
            "messages": [{ "role": "user", "content": prompt }],
            "tools": [{
                "type": "function",
                "function": {
                    "name": NAME_FUNCTION,
                    "description": "Name and document the taught function.",
                    "parameters": {
                        "type": "object",
                        "properties": {
                            "name": { "type": "string", "pattern": "^[a-z][a-z0-9_]*$" },
                            "doc": { "type": "string" }
                        },
                        "required": ["name", "doc"],
                        "additionalProperties": false
                    }
                }
            }],
            "tool_choice": { "type": "function", "function": { "name": NAME_FUNCTION } },
        })
    }
}

impl NameDocProvider for ChatNamer {
    fn name_and_doc(&self, request: &NamingRequest<'_>) -> Result<NameDoc, String> {
        let response = self.transport.post(&self.build_request_body(request)).map_err(|e| e.to_string())?;
        let call = response
            .pointer("/choices/0/message/tool_calls/0")
            .ok_or_else(|| "naming response has no tool call".to_string())?;
        let (_, args) = tool_arguments(call).map_err(|e| e.to_string())?;
        let field = |k: &str| args.get(k).and_then(Value::as_str).map(str::to_string);
        match (field("name"), field("doc")) {
            (Some(name), Some(doc)) => Ok(NameDoc { name, doc }),
            _ => Err("naming response lacks `name` or `doc`".into()),
        }
    }
}

/// A recorded planner round trip with the context needed to rebuild the request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireFixture {
    /// Scene file, relative to the repository root.
    pub scene: String,
    pub model: String,
    pub goal: String,
    pub input: super::PlannerInput,
    #[serde(default)]
    pub functions: Vec<FunctionRecord>,
    #[serde(flatten)]
    pub exchange: Exchange,
    /// Either an `Outcome` or `{"error": "<code>"}`.
    pub expected: Value,
}

impl WireFixture {
    pub fn load(path: impl AsRef<Path>) -> Result<WireFixture, String> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| e.to_string())?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.as_ref().display()))
    }
}
