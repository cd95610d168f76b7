use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{
    extract_code, Backend, BackendError, BackendKind, CandidateVersion, OptimizationRequest, Origin, PromptStrategy,
    SectionContext,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockAction {
    /// Return the section unchanged.
    Identity,
    /// Return this code.
    Code(String),
    /// Return the contents of this file.
    CodeFile(PathBuf),
    /// Section code followed by these lines.
    Append(String),
    Replace {
        from: String,
        to: String,
    },
    /// Fail the request with this message.
    Fail(String),
}

/// First matching rule wins; absent fields match anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<PromptStrategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempt: Option<u32>,
    pub action: MockAction,
}

impl MockRule {
    pub fn always(action: MockAction) -> Self {
        Self { section: None, strategy: None, attempt: None, action }
    }

    fn matches(&self, section_id: &str, request: &OptimizationRequest) -> bool {
        self.section.as_deref().is_none_or(|s| s == section_id)
            && self.strategy.is_none_or(|s| Some(s) == request.strategy)
            && self.attempt.is_none_or(|a| a == request.attempt)
    }
}

/// Deterministic, offline backend driven by a rule table. Unmatched
/// requests get the identity transformation.
#[derive(Debug, Clone)]
pub struct MockBackend {
    tool_id: String,
    kind: BackendKind,
    rules: Vec<MockRule>,
}

impl MockBackend {
    pub fn new(tool_id: impl Into<String>, kind: BackendKind, rules: Vec<MockRule>) -> Self {
        Self { tool_id: tool_id.into(), kind, rules }
    }

    pub fn identity(tool_id: impl Into<String>, kind: BackendKind) -> Self {
        Self::new(tool_id, kind, Vec::new())
    }

    fn transform(&self, request: &OptimizationRequest, section_id: &str) -> Result<String, BackendError> {
        let action = self
            .rules
            .iter()
            .find(|r| r.matches(section_id, request))
            .map(|r| &r.action)
            .unwrap_or(&MockAction::Identity);
        let code = &request.section_code;
        Ok(match action {
            MockAction::Identity => code.clone(),
            MockAction::Code(c) => c.clone(),
            MockAction::CodeFile(p) => fs::read_to_string(p)?,
            MockAction::Append(extra) => format!("{code}\n{extra}"),
            MockAction::Replace { from, to } => code.replace(from, to),
            MockAction::Fail(msg) => return Err(BackendError::Injected(msg.clone())),
        })
    }
}

impl Backend for MockBackend {
    fn tool_id(&self) -> &str {
        &self.tool_id
    }

    fn kind(&self) -> BackendKind {
        self.kind
    }

    fn optimize(
        &self,
        request: &OptimizationRequest,
        ctx: &SectionContext<'_>,
    ) -> Result<CandidateVersion, BackendError> {
        let code = self.transform(request, &ctx.section.id)?;
        match (self.kind, request.strategy) {
            (BackendKind::Llm, Some(strategy)) => {
                let raw = format!("Here is the optimized section.\n\n```c\n{code}\n```\n");
                Ok(CandidateVersion {
                    origin: Origin::llm(self.tool_id.clone(), strategy, request.attempt),
                    code: extract_code(&raw)?,
                    raw_response: Some(raw),
                })
            }
            (BackendKind::Llm, None) => Err(BackendError::InvalidRequest("LLM requests need a prompt strategy".into())),
            (BackendKind::Compiler, _) => {
                Ok(CandidateVersion { origin: Origin::compiler(self.tool_id.clone()), code, raw_response: None })
            }
        }
    }
}
