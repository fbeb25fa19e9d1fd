//! Text-generation backends: JSON over HTTP, plus in-process `mock://` backends.
//!
//! Mock endpoints:
//! - `mock://echo` answers `echo-<16 hex digits>-<seed>`, a hash of the prompt
//! - `mock://fixed/<text>` always answers `<text>`
//! - `mock://fail` always fails
//! - `mock://fail-seeds/<s1>,<s2>,…` fails for those seeds and echoes otherwise

use std::collections::BTreeSet;
use std::hash::Hasher;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::http::{HttpError, JsonClient};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid backend `{name}`: {message}")]
    Config { name: String, message: String },
    #[error("invalid generation params: {0}")]
    Params(String),
    #[error("backend `{name}` failed: {message}")]
    Failed { name: String, message: String },
    #[error(transparent)]
    Http(#[from] HttpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams { temperature: 0.0, top_p: 0.95, max_tokens: 1024, seed: None }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(BackendError::Params(format!("temperature {} must be >= 0", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(BackendError::Params(format!("top_p {} must lie in (0, 1]", self.top_p)));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::Params("max_tokens must be > 0".into()));
        }
        Ok(())
    }
}

/// Six sampling settings with distinct seeds `base_seed..base_seed+6`.
pub fn default_grid(base_seed: u64) -> Vec<GenerationParams> {
    [0.0, 0.3, 0.5, 0.7, 1.0, 1.0]
        .iter()
        .enumerate()
        .map(|(i, &temperature)| GenerationParams {
            temperature,
            top_p: 0.95,
            max_tokens: 1024,
            seed: Some(base_seed.wrapping_add(i as u64)),
        })
        .collect()
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireProtocol {
    /// POST `{model, prompt, temperature, top_p, max_tokens, seed}` → `{text}`.
    #[default]
    Completion,
    /// POST `{model, messages: [{role: "user", content}], …}` → `{choices: [{message: {content}}]}`.
    Chat,
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_max_retries() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSpec {
    pub name: String,
    pub endpoint: String,
    #[serde(default)]
    pub model_id: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub protocol: WireProtocol,
    /// Name of an environment variable holding a bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
}

impl BackendSpec {
    pub fn new(name: impl Into<String>, endpoint: impl Into<String>) -> Self {
        BackendSpec {
            name: name.into(),
            endpoint: endpoint.into(),
            model_id: String::new(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            protocol: WireProtocol::default(),
            api_key_env: None,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Backend>, BackendError> {
        let bad = |message: String| BackendError::Config { name: self.name.clone(), message };
        if self.timeout_ms == 0 {
            return Err(bad("timeout_ms must be > 0".into()));
        }
        if let Some(rest) = self.endpoint.strip_prefix("mock://") {
            let behaviour = if rest == "echo" {
                Mock::Echo
            } else if rest == "fail" {
                Mock::Fail
            } else if let Some(text) = rest.strip_prefix("fixed/") {
                Mock::Fixed(text.to_string())
            } else if let Some(list) = rest.strip_prefix("fail-seeds/") {
                let seeds = list
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.trim().parse::<u64>().map_err(|_| bad(format!("bad seed `{s}`"))))
                    .collect::<Result<BTreeSet<_>, _>>()?;
                Mock::FailSeeds(seeds)
            } else {
                return Err(bad(format!("unknown mock backend `{}`", self.endpoint)));
            };
            return Ok(Box::new(MockBackend { name: self.name.clone(), behaviour }));
        }
        if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return Err(bad(format!("endpoint `{}` is neither http(s) nor mock", self.endpoint)));
        }
        Ok(Box::new(HttpBackend {
            name: self.name.clone(),
            url: self.endpoint.clone(),
            model: self.model_id.clone(),
            protocol: self.protocol,
            client: JsonClient::new(Duration::from_millis(self.timeout_ms), self.max_retries)
                .with_bearer(JsonClient::bearer_from_env(self.api_key_env.as_deref())?),
        }))
    }
}

#[derive(Debug, Clone)]
enum Mock {
    Echo,
    Fixed(String),
    Fail,
    FailSeeds(BTreeSet<u64>),
}

struct MockBackend {
    name: String,
    behaviour: Mock,
}

fn echo(prompt: &str, params: &GenerationParams) -> String {
    let mut h = fnv::FnvHasher::default();
    h.write(prompt.as_bytes());
    format!("echo-{:016x}-{}", h.finish(), params.seed.map_or_else(|| "none".to_string(), |s| s.to_string()))
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        params.validate()?;
        let fail = || BackendError::Failed { name: self.name.clone(), message: "mock failure".into() };
        match &self.behaviour {
            Mock::Echo => Ok(echo(prompt, params)),
            Mock::Fixed(t) => Ok(t.clone()),
            Mock::Fail => Err(fail()),
            Mock::FailSeeds(seeds) => match params.seed {
                Some(s) if seeds.contains(&s) => Err(fail()),
                _ => Ok(echo(prompt, params)),
            },
        }
    }
}

struct HttpBackend {
    name: String,
    url: String,
    model: String,
    protocol: WireProtocol,
    client: JsonClient,
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        params.validate()?;
        let mut body = json!({
            "model": self.model,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens,
            "seed": params.seed,
        });
        match self.protocol {
            WireProtocol::Completion => body["prompt"] = json!(prompt),
            WireProtocol::Chat => body["messages"] = json!([{ "role": "user", "content": prompt }]),
        }
        let resp = self.client.post(&self.url, &body)?;
        let text = match self.protocol {
            WireProtocol::Completion => resp.get("text").and_then(Value::as_str),
            WireProtocol::Chat => resp.pointer("/choices/0/message/content").and_then(Value::as_str),
        };
        text.map(str::to_string).ok_or_else(|| BackendError::Failed {
            name: self.name.clone(),
            message: format!("response lacks generated text: {resp}"),
        })
    }
}
