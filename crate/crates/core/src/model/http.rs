//! Chat-completion HTTP adapter.
//!
//! Sends the full input text as a single user message to an
//! OpenAI-compatible chat endpoint and runs the response content through the
//! verbalizer. Transport failures, non-2xx statuses, and unparseable
//! responses are all retried with exponential backoff; when the retry budget
//! runs out the error surfaces so the search layer can abstain on the
//! example instead of crashing the campaign.

use std::time::Duration;

use serde_json::json;

use super::limiter::RateLimiter;
use super::{parse_label, ModelError, Prediction, ThreatModel, Verbalizer};
use crate::dataset::LabelSet;
use crate::text::ModelInput;

/// Environment variable holding the bearer token, read at construction.
pub const API_KEY_ENV: &str = "RITFIS_API_KEY";

#[derive(Clone, Copy, Debug)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_secs(1),
            factor: 2,
        }
    }
}

impl RetryPolicy {
    /// Delay before the attempt with the given zero-based index.
    fn delay_before(&self, attempt: u32) -> Duration {
        if attempt == 0 {
            Duration::ZERO
        } else {
            self.base_delay * self.factor.saturating_pow(attempt - 1)
        }
    }
}

pub struct HttpChatModel {
    endpoint: String,
    model: String,
    temperature: f64,
    api_key: Option<String>,
    labels: LabelSet,
    verbalizer: Verbalizer,
    agent: ureq::Agent,
    limiter: RateLimiter,
    retry: RetryPolicy,
}

impl HttpChatModel {
    pub fn new(endpoint: &str, model: &str, labels: LabelSet, verbalizer: Verbalizer) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(true)
            .build();
        HttpChatModel {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            temperature: 0.0,
            api_key: std::env::var(API_KEY_ENV).ok(),
            labels,
            verbalizer,
            agent: config.into(),
            limiter: RateLimiter::new(4, Duration::ZERO),
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_limiter(mut self, limiter: RateLimiter) -> Self {
        self.limiter = limiter;
        self
    }

    fn post(&self, content: &str) -> Result<String, String> {
        let payload = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": self.temperature,
        });
        let permit = self.limiter.acquire();
        let mut request = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("authorization", &format!("Bearer {key}"));
        }
        let result = request.send_json(&payload);
        drop(permit);
        let mut response = result.map_err(|e| e.to_string())?;
        let body: serde_json::Value = response
            .body_mut()
            .read_json()
            .map_err(|e| format!("unreadable response body: {e}"))?;
        body.pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| "response missing choices[0].message.content".to_string())
    }
}

impl ThreatModel for HttpChatModel {
    fn classify(&self, input: &ModelInput) -> Result<Prediction, ModelError> {
        let mut last_error = String::new();
        let mut last_raw: Option<String> = None;
        for attempt in 0..self.retry.attempts {
            let delay = self.retry.delay_before(attempt);
            if !delay.is_zero() {
                std::thread::sleep(delay);
            }
            match self.post(&input.full_text) {
                Ok(raw) => match parse_label(&raw, &self.verbalizer, &self.labels) {
                    Ok(prediction) => return Ok(prediction),
                    Err(_) => last_raw = Some(raw),
                },
                Err(message) => {
                    last_error = message;
                    last_raw = None;
                }
            }
        }
        match last_raw {
            Some(raw) => Err(ModelError::LabelParseFailed { raw }),
            None => Err(ModelError::QueryFailed {
                attempts: self.retry.attempts,
                message: last_error,
            }),
        }
    }

    fn label_set(&self) -> &LabelSet {
        &self.labels
    }

    fn describe(&self) -> String {
        format!("http:{}", self.model)
    }

    /// One minimal request to prove the endpoint is reachable and answering
    /// 2xx. The response content is not interpreted.
    fn preflight(&self) -> Result<(), ModelError> {
        self.post("ping").map(|_| ()).map_err(|message| {
            ModelError::QueryFailed {
                attempts: 1,
                message: format!("preflight failed: {message}"),
            }
        })
    }
}
