//! Minimal JSON-over-HTTP client shared by remote scorers and model backends.

use std::time::Duration;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("request to {url} failed after {attempts} attempt(s): {message}")]
    Transport { url: String, attempts: u32, message: String },
    #[error("unexpected response from {url}: {message}")]
    Response { url: String, message: String },
    #[error("environment variable `{0}` holding the endpoint credential is not set")]
    MissingCredential(String),
}

#[derive(Debug, Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    retries: u32,
    bearer: Option<String>,
}

impl JsonClient {
    pub fn new(timeout: Duration, retries: u32) -> Self {
        let config = ureq::Agent::config_builder().timeout_global(Some(timeout)).build();
        JsonClient { agent: config.into(), retries, bearer: None }
    }

    /// Sends `Authorization: Bearer <token>` with every request.
    pub fn with_bearer(mut self, token: Option<String>) -> Self {
        self.bearer = token;
        self
    }

    /// Reads a credential from the environment variable `var`, if one is named.
    pub fn bearer_from_env(var: Option<&str>) -> Result<Option<String>, HttpError> {
        match var {
            None => Ok(None),
            Some(v) => std::env::var(v).map(Some).map_err(|_| HttpError::MissingCredential(v.to_string())),
        }
    }

    /// POSTs `body` and parses the response as JSON. Transport failures and
    /// non-2xx statuses are retried up to `retries` extra times.
    pub fn post(&self, url: &str, body: &impl Serialize) -> Result<Value, HttpError> {
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(50 << attempt.min(6)));
            }
            let mut req = self.agent.post(url);
            if let Some(t) = &self.bearer {
                req = req.header("Authorization", format!("Bearer {t}"));
            }
            match req.send_json(body) {
                Ok(mut resp) => {
                    return resp.body_mut().read_json::<Value>().map_err(|e| HttpError::Response {
                        url: url.to_string(),
                        message: e.to_string(),
                    })
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(HttpError::Transport { url: url.to_string(), attempts: self.retries + 1, message: last })
    }
}
