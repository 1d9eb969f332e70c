//! Blocking JSON-over-HTTP with bounded retries, shared by the live
//! detector and VLM backends.

use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::BackendError;

const MAX_BODY_BYTES: u64 = 256 * 1024 * 1024;

/// Retries apply to transport failures, 429 and 5xx responses only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    /// Delay before the first retry; doubles on every further attempt.
    pub base_delay_ms: u64,
    pub timeout_secs: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 2,
            base_delay_ms: 500,
            timeout_secs: 120,
        }
    }
}

pub(crate) struct JsonClient {
    agent: ureq::Agent,
    api_key: Option<String>,
    policy: RetryPolicy,
    // One request in flight per client.
    gate: Mutex<()>,
}

impl JsonClient {
    pub(crate) fn new(api_key: Option<String>, policy: RetryPolicy) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(policy.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            api_key,
            policy,
            gate: Mutex::new(()),
        }
    }

    pub(crate) fn post(&self, url: &str, body: &Value) -> Result<Value, BackendError> {
        let _guard = self.gate.lock().unwrap_or_else(|e| e.into_inner());
        let attempts_allowed = self.policy.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 1..=attempts_allowed {
            if attempt > 1 {
                let delay = self.policy.base_delay_ms << (attempt - 2).min(16);
                thread::sleep(Duration::from_millis(delay));
            }
            let mut req = self.agent.post(url);
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            match req.send_json(body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if status == 429 || status >= 500 {
                        last_error = format!("HTTP {status} from {url}");
                        log::warn!("attempt {attempt}/{attempts_allowed}: {last_error}");
                        continue;
                    }
                    if status >= 400 {
                        let text = resp
                            .body_mut()
                            .read_to_string()
                            .unwrap_or_default();
                        return Err(BackendError::Config(format!(
                            "HTTP {status} from {url}: {text}"
                        )));
                    }
                    return resp
                        .body_mut()
                        .with_config()
                        .limit(MAX_BODY_BYTES)
                        .read_json::<Value>()
                        .map_err(|e| BackendError::Protocol(e.to_string()));
                }
                Err(e) => {
                    last_error = e.to_string();
                    log::warn!("attempt {attempt}/{attempts_allowed} to {url} failed: {last_error}");
                }
            }
        }
        Err(BackendError::Transport {
            attempts: attempts_allowed,
            message: last_error,
        })
    }
}

/// Reads an API key from the environment, treating empty values as unset.
pub(crate) fn env_key(var: &str) -> Option<String> {
    std::env::var(var).ok().filter(|v| !v.trim().is_empty())
}
