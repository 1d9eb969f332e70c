//! VLM backends: OpenAI-compatible chat completions, replay from recorded
//! replies, a recorder, and scripted replies for tests and offline runs.

use std::fs;
use std::path::{Path, PathBuf};

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{AgentRole, CallContext, VlmBackend, VlmRequest};
use crate::error::BackendError;
use crate::http::{env_key, JsonClient, RetryPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveVlmConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub retry: RetryPolicy,
}

impl Default for LiveVlmConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "o3-2025-04-16".into(),
            api_key_env: "VLM_API_KEY".into(),
            retry: RetryPolicy::default(),
        }
    }
}

pub struct LiveVlm {
    config: LiveVlmConfig,
    client: JsonClient,
}

impl LiveVlm {
    pub fn new(config: LiveVlmConfig) -> Result<Self, BackendError> {
        if config.endpoint.trim().is_empty() || config.model.trim().is_empty() {
            return Err(BackendError::Config("VLM endpoint and model must be set".into()));
        }
        let key = env_key(&config.api_key_env);
        if key.is_none() {
            log::warn!("{} is not set; sending unauthenticated requests", config.api_key_env);
        }
        let client = JsonClient::new(key, config.retry);
        Ok(Self { config, client })
    }

    /// Chat-completions body with images inlined as PNG data URLs after the
    /// user text.
    pub fn chat_body(model: &str, request: &VlmRequest) -> Value {
        let mut messages = Vec::new();
        if let Some(system) = &request.system {
            messages.push(json!({"role": "system", "content": system}));
        }
        let mut content = vec![json!({"type": "text", "text": request.user})];
        for a in &request.attachments {
            let data = base64::engine::general_purpose::STANDARD.encode(&a.png);
            content.push(json!({
                "type": "image_url",
                "image_url": {"url": format!("data:image/png;base64,{data}")}
            }));
        }
        messages.push(json!({"role": "user", "content": content}));
        json!({"model": model, "messages": messages})
    }

    pub fn reply_text(body: &Value) -> Result<String, BackendError> {
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Protocol("response has no choices[0].message.content".into()))
    }
}

impl VlmBackend for LiveVlm {
    fn complete(&self, _ctx: &CallContext, request: &VlmRequest) -> Result<String, BackendError> {
        let body = Self::chat_body(&self.config.model, request);
        Self::reply_text(&self.client.post(&self.config.endpoint, &body)?)
    }
}

fn reply_path(dir: &Path, ctx: &CallContext) -> PathBuf {
    let name = match ctx.iteration {
        0 => format!("{}_run{}.txt", ctx.agent.as_str(), ctx.run),
        i => format!("{}_iter{i}_run{}.txt", ctx.agent.as_str(), ctx.run),
    };
    dir.join(&ctx.batch_id).join(name)
}

/// Serves replies from `<dir>/<batch>/<agent>_run<k>.txt` (later refinement
/// rounds use `<agent>_iter<i>_run<k>.txt`).
#[derive(Debug, Clone)]
pub struct ReplayVlm {
    dir: PathBuf,
}

impl ReplayVlm {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl VlmBackend for ReplayVlm {
    fn complete(&self, ctx: &CallContext, _request: &VlmRequest) -> Result<String, BackendError> {
        let path = reply_path(&self.dir, ctx);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(BackendError::MissingFixture(path)),
            Err(e) => Err(BackendError::Unavailable(format!("{}: {e}", path.display()))),
        }
    }
}

/// Passes calls through and stores every reply where [`ReplayVlm`] finds it.
pub struct RecordingVlm<B> {
    inner: B,
    dir: PathBuf,
}

impl<B> RecordingVlm<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            dir: dir.into(),
        }
    }
}

impl<B: VlmBackend> VlmBackend for RecordingVlm<B> {
    fn complete(&self, ctx: &CallContext, request: &VlmRequest) -> Result<String, BackendError> {
        let text = self.inner.complete(ctx, request)?;
        let path = reply_path(&self.dir, ctx);
        let write = || -> std::io::Result<()> {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, &text)
        };
        write().map_err(|e| BackendError::Unavailable(format!("{}: {e}", path.display())))?;
        Ok(text)
    }
}

/// Canned replies per agent, chosen by run index (cycling). A `null` entry
/// or an empty list makes the call fail.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptedVlm {
    pub agent1: Vec<Option<String>>,
    pub agent2: Vec<Option<String>>,
}

impl ScriptedVlm {
    pub fn new(agent1: impl Into<Option<String>>, agent2: impl Into<Option<String>>) -> Self {
        Self {
            agent1: vec![agent1.into()],
            agent2: vec![agent2.into()],
        }
    }

    /// Every call fails.
    pub fn failing() -> Self {
        Self::default()
    }
}

impl VlmBackend for ScriptedVlm {
    fn complete(&self, ctx: &CallContext, _request: &VlmRequest) -> Result<String, BackendError> {
        let replies = match ctx.agent {
            AgentRole::Agent1 => &self.agent1,
            AgentRole::Agent2 => &self.agent2,
        };
        if replies.is_empty() {
            return Err(BackendError::Unavailable(format!("no scripted reply for {}", ctx.agent.as_str())));
        }
        replies[ctx.run % replies.len()]
            .clone()
            .ok_or_else(|| BackendError::Unavailable(format!("scripted failure for {} run {}", ctx.agent.as_str(), ctx.run)))
    }
}
