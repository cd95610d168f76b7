use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    extract_code, render_prompt, strip_section_markers, Backend, BackendError, BackendKind, CandidateVersion,
    OptimizationRequest, Origin, SamplingParams, SectionContext,
};

/// Environment variable holding the bearer token for chat endpoints.
pub const API_KEY_VAR: &str = "PCAOT_LLM_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total tries per request, including the first.
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, base_delay_ms: 500, max_delay_ms: 8_000 }
    }
}

impl RetryPolicy {
    /// Delay before try number `attempt + 1`, doubling from the base.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(20);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

#[derive(Debug, Clone)]
pub struct LlmEndpoint {
    pub url: String,
    pub api_key: Option<String>,
}

impl LlmEndpoint {
    /// Endpoint with the key taken from [`API_KEY_VAR`], if set.
    pub fn from_env(url: impl Into<String>) -> Self {
        Self { url: url.into(), api_key: std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty()) }
    }
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Debug, Deserialize)]
struct Message {
    content: Option<String>,
}

enum Failure {
    Retry(BackendError),
    Fatal(BackendError),
}

pub struct LlmBackend {
    tool_id: String,
    endpoint: LlmEndpoint,
    params: SamplingParams,
    retry: RetryPolicy,
    agent: ureq::Agent,
}

impl LlmBackend {
    pub fn new(tool_id: impl Into<String>, endpoint: LlmEndpoint, params: SamplingParams) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .into();
        Self { tool_id: tool_id.into(), endpoint, params, retry: RetryPolicy::default(), agent }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn params(&self) -> &SamplingParams {
        &self.params
    }

    fn call_once(&self, prompt: &str) -> Result<String, Failure> {
        let body = json!({
            "model": self.params.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.params.temperature,
            "top_p": self.params.top_p,
        });
        let mut req = self.agent.post(&self.endpoint.url).header("Content-Type", "application/json");
        if let Some(key) = &self.endpoint.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| Failure::Retry(BackendError::Transport(e.to_string())))?;
        let status = resp.status().as_u16();
        match status {
            200..=299 => {
                let parsed: ChatResponse = resp
                    .body_mut()
                    .read_json()
                    .map_err(|e| Failure::Fatal(BackendError::MalformedResponse(e.to_string())))?;
                parsed.choices.into_iter().next().and_then(|c| c.message.content).ok_or_else(|| {
                    Failure::Fatal(BackendError::MalformedResponse("no choices[0].message.content".into()))
                })
            }
            401 | 403 => Err(Failure::Fatal(BackendError::Auth(status))),
            429 => Err(Failure::Retry(BackendError::RateLimited(0))),
            500..=599 => Err(Failure::Retry(BackendError::Transport(format!("HTTP {status}")))),
            _ => Err(Failure::Fatal(BackendError::Transport(format!("HTTP {status}")))),
        }
    }

    /// One chat-completion exchange with retries on transport errors, 5xx
    /// and 429.
    pub fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let tries = self.retry.max_attempts.max(1);
        let mut last = BackendError::Transport("no attempt made".into());
        for attempt in 1..=tries {
            match self.call_once(prompt) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(e)) => {
                    log::warn!("{}: attempt {attempt}/{tries} failed: {e}", self.tool_id);
                    last = e;
                    if attempt < tries {
                        thread::sleep(self.retry.delay(attempt));
                    }
                }
            }
        }
        Err(match last {
            BackendError::RateLimited(_) => BackendError::RateLimited(tries),
            other => other,
        })
    }

    pub fn request_llm(&self, request: &OptimizationRequest) -> Result<CandidateVersion, BackendError> {
        let strategy = request
            .strategy
            .ok_or_else(|| BackendError::InvalidRequest("LLM requests need a prompt strategy".into()))?;
        let prompt = render_prompt(strategy, &request.section_code);
        let raw = self.complete(&prompt)?;
        let code = strip_section_markers(&extract_code(&raw)?);
        Ok(CandidateVersion {
            origin: Origin::llm(self.tool_id.clone(), strategy, request.attempt),
            code,
            raw_response: Some(raw),
        })
    }
}

impl Backend for LlmBackend {
    fn tool_id(&self) -> &str {
        &self.tool_id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Llm
    }

    fn optimize(
        &self,
        request: &OptimizationRequest,
        _ctx: &SectionContext<'_>,
    ) -> Result<CandidateVersion, BackendError> {
        self.request_llm(request)
    }
}
