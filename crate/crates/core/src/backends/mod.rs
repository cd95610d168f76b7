//! Optimizer backends that turn a section into candidate variants.
//!
//! Three kinds ship: a chat-completions client ([`LlmBackend`]), a driver
//! for external source-to-source compilers ([`CompilerBackend`]) and a
//! table-driven [`MockBackend`] for offline runs.

mod compiler;
mod extract;
mod llm;
mod mock;
pub mod mock_server;
mod prompt;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sections::{extract_sections, ExperimentalSection, StateManifest};

pub use compiler::{wrap_translation_unit, CompilerBackend, CompilerDriverConfig};
pub use extract::extract_code;
pub use llm::{LlmBackend, LlmEndpoint, RetryPolicy, API_KEY_VAR};
pub use mock::{MockAction, MockBackend, MockRule};
pub use prompt::{render_prompt, PromptStrategy, COT_SUFFIX, DIP_TEXT, IP_TEXT};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("rate limited after {0} attempts")]
    RateLimited(u32),
    #[error("empty response")]
    EmptyResponse,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("tool `{tool}` failed (exit {code:?}): {stderr}")]
    ToolFailure { tool: String, code: Option<i32>, stderr: String },
    #[error("tool output missing: {0}")]
    OutputMissing(String),
    #[error("backend i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("{0}")]
    Injected(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Llm,
    Compiler,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptimizationRequest {
    pub section_code: String,
    /// Absent for compiler backends.
    pub strategy: Option<PromptStrategy>,
    pub attempt: u32,
}

/// Who produced a candidate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Origin {
    pub tool_id: String,
    pub strategy: Option<PromptStrategy>,
    pub attempt: Option<u32>,
}

impl Origin {
    pub fn llm(tool_id: impl Into<String>, strategy: PromptStrategy, attempt: u32) -> Self {
        Self { tool_id: tool_id.into(), strategy: Some(strategy), attempt: Some(attempt) }
    }

    pub fn compiler(tool_id: impl Into<String>) -> Self {
        Self { tool_id: tool_id.into(), strategy: None, attempt: None }
    }

    pub fn is_llm(&self) -> bool {
        self.strategy.is_some()
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.strategy, self.attempt) {
            (Some(s), Some(a)) => write!(f, "{}/{}/{}", self.tool_id, s, a),
            _ => f.write_str(&self.tool_id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateVersion {
    pub origin: Origin,
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    pub model: String,
}

fn default_temperature() -> f64 {
    0.2
}

fn default_top_p() -> f64 {
    0.1
}

impl SamplingParams {
    pub fn for_model(model: impl Into<String>) -> Self {
        Self { temperature: default_temperature(), top_p: default_top_p(), model: model.into() }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=2.0).contains(&self.temperature) && self.top_p > 0.0 && self.top_p <= 1.0
    }
}

/// Everything a backend may need about the section it optimizes.
#[derive(Debug, Clone, Copy)]
pub struct SectionContext<'a> {
    pub section: &'a ExperimentalSection,
    pub manifest: &'a StateManifest,
    pub support_code: &'a str,
}

pub trait Backend: Send + Sync {
    fn tool_id(&self) -> &str;

    fn kind(&self) -> BackendKind;

    fn optimize(
        &self,
        request: &OptimizationRequest,
        ctx: &SectionContext<'_>,
    ) -> Result<CandidateVersion, BackendError>;
}

pub type SharedBackend = Arc<dyn Backend>;

/// If a model echoed the experimental markers back, keep only what is
/// between them.
pub fn strip_section_markers(code: &str) -> String {
    match extract_sections(code) {
        Ok(sections) if !sections.is_empty() => sections[0].body_text.clone(),
        _ => code.to_string(),
    }
}
