//! Schema-constrained agent calls with retries and cost accounting.
//!
//! Every call is made through [`Gateway::complete`] with an output type that
//! implements [`AgentOutput`]; the type fixes the agent role and the JSON
//! schema. Backends only move text: [`HttpBackend`] talks to a
//! chat-completions endpoint, [`ReplayBackend`] serves a recorded transcript,
//! and [`ScriptedBackend`] pops per-role outputs from a script (used with
//! [`RecordingBackend`] to author transcripts).

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chaos_core::ledger::{CostLedger, Phase, Usage};
use chaos_core::record::{AgentRole, CallRecord};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::prompts;

pub const MAX_ATTEMPTS: u32 = 3;

/// Key → text context of one agent call. Ordered, so digests are stable.
pub type PromptContext = BTreeMap<String, String>;

/// An output type bound to exactly one agent role.
pub trait AgentOutput: DeserializeOwned + Serialize {
    const ROLE: AgentRole;

    /// JSON schema sent to backends that support constrained output.
    fn schema() -> Value;

    /// Structural checks beyond what deserialization enforces.
    fn check(&self) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentReply<T> {
    pub parsed: T,
    pub usage: Usage,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("{role}: output violated the schema {MAX_ATTEMPTS} times; last violation: {violation}")]
    SchemaViolationExhausted { role: AgentRole, last_output: String, violation: String },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("transcript has no entry for {role} attempt {attempt} context {digest}")]
    TranscriptMiss { role: AgentRole, attempt: u32, digest: String },
}

/// One request as a backend sees it.
#[derive(Debug, Clone)]
pub struct BackendRequest<'a> {
    pub role: AgentRole,
    pub attempt: u32,
    pub context_digest: &'a str,
    pub system: &'a str,
    pub user: &'a str,
    pub schema: &'a Value,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendResponse {
    pub text: String,
    /// Provider-reported token counts, when available.
    pub tokens: Option<(u64, u64)>,
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &BackendRequest<'_>) -> Result<BackendResponse, GatewayError>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(&self, request: &BackendRequest<'_>) -> Result<BackendResponse, GatewayError> {
        (**self).complete(request)
    }
}

/// USD per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prices {
    pub price_in: f64,
    pub price_out: f64,
}

/// Hex SHA-256 over role, template version, and the context map.
pub fn context_digest(role: AgentRole, context: &PromptContext) -> String {
    let mut hasher = Sha256::new();
    hasher.update(role.name().as_bytes());
    hasher.update([0]);
    hasher.update(prompts::TEMPLATE_VERSION.as_bytes());
    hasher.update([0]);
    hasher.update(serde_json::to_vec(context).expect("string maps serialize"));
    hex::encode(hasher.finalize())
}

/// Token estimate for backends that report none: one token per four bytes.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

#[derive(Debug, Default)]
struct Recorder {
    ledger: CostLedger,
    calls: Vec<CallRecord>,
}

/// The single entry point for agent calls. Usage is appended to the ledger
/// through a mutex, so one gateway may be shared by concurrent callers.
pub struct Gateway {
    backend: Box<dyn Backend>,
    prices: Prices,
    temperature: f64,
    recorder: Mutex<Recorder>,
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>, prices: Prices) -> Self {
        Gateway {
            backend,
            prices,
            temperature: 0.0,
            recorder: Mutex::new(Recorder::default()),
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    /// Calls the agent for `T`, retrying up to [`MAX_ATTEMPTS`] times with
    /// the violation appended to the prompt. Usage of every attempt is billed
    /// to `phase`, including calls that end in an error.
    pub fn complete<T: AgentOutput>(&self, phase: Phase, context: &PromptContext) -> Result<AgentReply<T>, GatewayError> {
        let role = T::ROLE;
        let digest = context_digest(role, context);
        let schema = T::schema();
        let system = prompts::system_prompt(role);
        let base = prompts::render_user(role, context);
        let mut usage = Usage::default();
        let mut attempts = 0;
        let mut last: Option<(String, String)> = None;
        let outcome = loop {
            if attempts == MAX_ATTEMPTS {
                let (last_output, violation) = last.take().expect("at least one attempt ran");
                break Err(GatewayError::SchemaViolationExhausted { role, last_output, violation });
            }
            attempts += 1;
            let user = match &last {
                None => base.clone(),
                Some((output, violation)) => prompts::with_violation(&base, output, violation),
            };
            let request = BackendRequest {
                role,
                attempt: attempts,
                context_digest: &digest,
                system,
                user: &user,
                schema: &schema,
                temperature: self.temperature,
            };
            let started = Instant::now();
            let response = match self.backend.complete(&request) {
                Ok(r) => r,
                Err(e) => break Err(e),
            };
            let (tokens_in, tokens_out) = response
                .tokens
                .unwrap_or_else(|| (estimate_tokens(system) + estimate_tokens(&user), estimate_tokens(&response.text)));
            usage += Usage::priced(tokens_in, tokens_out, started.elapsed().as_secs_f64(), self.prices.price_in, self.prices.price_out);
            match parse_output::<T>(&response.text) {
                Ok(parsed) => break Ok(parsed),
                Err(violation) => last = Some((response.text, violation)),
            }
        };
        let completed = match &outcome {
            Err(GatewayError::BackendUnavailable(_) | GatewayError::TranscriptMiss { .. }) => attempts - 1,
            _ => attempts,
        };
        if completed > 0 {
            let mut rec = self.recorder.lock().expect("recorder poisoned");
            rec.ledger.record(phase, usage);
            rec.calls.push(CallRecord { role, phase, attempts: completed, usage });
        }
        outcome.map(|parsed| AgentReply { parsed, usage, attempts })
    }

    /// Like [`Gateway::complete`], then runs `accept` on the parsed output.
    /// A rejection is fed back under the `violation` context key and the
    /// call repeats, up to `tries` times. `Ok(Err(v))` carries the last
    /// rejection once the tries are spent.
    pub fn complete_checked<T: AgentOutput, R>(
        &self,
        phase: Phase,
        context: &PromptContext,
        tries: u32,
        mut accept: impl FnMut(T) -> Result<R, String>,
    ) -> Result<Result<R, String>, GatewayError> {
        let mut ctx = context.clone();
        let mut last = String::new();
        for _ in 0..tries {
            let reply = self.complete::<T>(phase, &ctx)?;
            let shown = serde_json::to_string(&reply.parsed).expect("outputs serialize");
            match accept(reply.parsed) {
                Ok(r) => return Ok(Ok(r)),
                Err(v) => {
                    ctx.insert("violation".into(), format!("Your previous answer {shown} was rejected: {v}"));
                    last = v;
                }
            }
        }
        Ok(Err(last))
    }

    pub fn ledger(&self) -> CostLedger {
        self.recorder.lock().expect("recorder poisoned").ledger.clone()
    }

    pub fn calls(&self) -> Vec<CallRecord> {
        self.recorder.lock().expect("recorder poisoned").calls.clone()
    }
}

fn parse_output<T: AgentOutput>(text: &str) -> Result<T, String> {
    let value: Value = serde_json::from_str(text.trim()).map_err(|e| format!("output is not JSON: {e}"))?;
    let parsed: T = serde_json::from_value(value).map_err(|e| format!("output does not match the schema: {e}"))?;
    parsed.check()?;
    Ok(parsed)
}

/// One line of a replay transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub role: AgentRole,
    pub attempt: u32,
    pub context_digest: String,
    pub output: Value,
}

#[derive(Debug, thiserror::Error)]
pub enum TranscriptError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {reason}")]
    Malformed { path: String, line: usize, reason: String },
}

/// Serves outputs from a transcript keyed by (role, attempt, context digest).
pub struct ReplayBackend {
    entries: HashMap<(AgentRole, u32, String), Value>,
}

impl ReplayBackend {
    pub fn from_entries(entries: Vec<TranscriptEntry>) -> Result<Self, String> {
        let mut map = HashMap::new();
        for e in entries {
            let key = (e.role, e.attempt, e.context_digest.clone());
            if let Some(prev) = map.insert(key, e.output.clone()) {
                if prev != e.output {
                    return Err(format!("conflicting outputs for {} attempt {} context {}", e.role, e.attempt, e.context_digest));
                }
            }
        }
        Ok(ReplayBackend { entries: map })
    }

    pub fn load(path: &Path) -> Result<Self, TranscriptError> {
        let name = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| TranscriptError::Io { path: name.clone(), source })?;
        let entries = parse_transcript(&text).map_err(|(line, reason)| TranscriptError::Malformed { path: name.clone(), line, reason })?;
        ReplayBackend::from_entries(entries).map_err(|reason| TranscriptError::Malformed { path: name, line: 0, reason })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parses JSON-lines transcript text; blank lines are skipped.
pub fn parse_transcript(text: &str) -> Result<Vec<TranscriptEntry>, (usize, String)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e.to_string())))
        .collect()
}

/// One compact JSON object per line, in the order given.
pub fn render_transcript(entries: &[TranscriptEntry]) -> String {
    entries.iter().map(|e| serde_json::to_string(e).expect("entries serialize") + "\n").collect()
}

impl Backend for ReplayBackend {
    fn complete(&self, request: &BackendRequest<'_>) -> Result<BackendResponse, GatewayError> {
        let key = (request.role, request.attempt, request.context_digest.to_string());
        let output = self.entries.get(&key).ok_or_else(|| GatewayError::TranscriptMiss {
            role: request.role,
            attempt: request.attempt,
            digest: request.context_digest.to_string(),
        })?;
        Ok(BackendResponse { text: output_text(output), tokens: None })
    }
}

/// Text a stored output stands for: strings verbatim, anything else as JSON.
fn output_text(output: &Value) -> String {
    match output {
        Value::String(s) => s.clone(),
        other => serde_json::to_string(other).expect("values serialize"),
    }
}

/// Pops outputs from per-role queues in call order.
pub struct ScriptedBackend {
    queues: Mutex<HashMap<AgentRole, VecDeque<Value>>>,
}

impl ScriptedBackend {
    pub fn new(script: BTreeMap<AgentRole, Vec<Value>>) -> Self {
        ScriptedBackend {
            queues: Mutex::new(script.into_iter().map(|(k, v)| (k, v.into())).collect()),
        }
    }

    /// Reads a script file: a JSON object mapping role names to output lists.
    pub fn load(path: &Path) -> Result<Self, TranscriptError> {
        let name = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| TranscriptError::Io { path: name.clone(), source })?;
        let script: BTreeMap<AgentRole, Vec<Value>> =
            serde_json::from_str(&text).map_err(|e| TranscriptError::Malformed { path: name, line: e.line(), reason: e.to_string() })?;
        Ok(ScriptedBackend::new(script))
    }

    /// Outputs not yet consumed, per role.
    pub fn remaining(&self) -> BTreeMap<AgentRole, usize> {
        let queues = self.queues.lock().expect("script poisoned");
        queues.iter().filter(|(_, q)| !q.is_empty()).map(|(r, q)| (*r, q.len())).collect()
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &BackendRequest<'_>) -> Result<BackendResponse, GatewayError> {
        let mut queues = self.queues.lock().expect("script poisoned");
        let output = queues
            .get_mut(&request.role)
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| GatewayError::BackendUnavailable(format!("script has no more outputs for {}", request.role)))?;
        Ok(BackendResponse { text: output_text(&output), tokens: None })
    }
}

/// Passes calls through and keeps a transcript entry for each reply.
pub struct RecordingBackend<B> {
    inner: B,
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend { inner, entries: Mutex::new(Vec::new()) }
    }

    /// Recorded entries with exact repeats removed.
    pub fn entries(&self) -> Vec<TranscriptEntry> {
        let entries = self.entries.lock().expect("recording poisoned");
        let mut out: Vec<TranscriptEntry> = Vec::new();
        for e in entries.iter() {
            if !out.contains(e) {
                out.push(e.clone());
            }
        }
        out
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn complete(&self, request: &BackendRequest<'_>) -> Result<BackendResponse, GatewayError> {
        let response = self.inner.complete(request)?;
        let output = serde_json::from_str(&response.text).unwrap_or_else(|_| Value::String(response.text.clone()));
        self.entries.lock().expect("recording poisoned").push(TranscriptEntry {
            role: request.role,
            attempt: request.attempt,
            context_digest: request.context_digest.to_string(),
            output,
        });
        Ok(response)
    }
}

impl<B: Backend> Backend for std::sync::Arc<B> {
    fn complete(&self, request: &BackendRequest<'_>) -> Result<BackendResponse, GatewayError> {
        (**self).complete(request)
    }
}

/// Chat-completions client.
pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
    model: String,
}

impl HttpBackend {
    pub fn new(api_base: &str, api_key: Option<String>, model: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        HttpBackend {
            agent,
            endpoint: format!("{}/chat/completions", api_base.trim_end_matches('/')),
            api_key,
            model: model.into(),
        }
    }

    fn body(&self, request: &BackendRequest<'_>) -> Value {
        serde_json::json!({
            "model": self.model,
            "temperature": request.temperature,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "response_format": {
                "type": "json_schema",
                "json_schema": {"name": request.role.name(), "schema": request.schema},
            },
        })
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &BackendRequest<'_>) -> Result<BackendResponse, GatewayError> {
        let unavailable = |e: &dyn std::fmt::Display| GatewayError::BackendUnavailable(format!("{}: {e}", self.endpoint));
        let mut call = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = call.send_json(self.body(request)).map_err(|e| unavailable(&e))?;
        let reply: Value = response.body_mut().read_json().map_err(|e| unavailable(&e))?;
        let text = reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| unavailable(&"response has no choices[0].message.content"))?
            .to_string();
        let usage = reply.get("usage");
        let count = |k: &str| usage.and_then(|u| u.get(k)).and_then(Value::as_u64);
        let tokens = count("prompt_tokens").zip(count("completion_tokens"));
        Ok(BackendResponse { text, tokens })
    }
}
