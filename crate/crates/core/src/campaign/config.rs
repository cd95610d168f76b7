use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::backends::{
    BackendKind, CompilerBackend, CompilerDriverConfig, LlmBackend, LlmEndpoint, MockAction, MockBackend, MockRule,
    PromptStrategy, SamplingParams, SharedBackend,
};
use crate::checkpoint::Tolerance;
use crate::runner::{BuildSpec, DEFAULT_THREADS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionEntry {
    pub source: PathBuf,
    pub manifest: PathBuf,
    /// C text placed before the section in replay drivers and compiler
    /// inputs: callees, macros, extra declarations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_code: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    /// OpenAI-style chat-completions endpoint. The key comes from the
    /// environment, never from the config.
    Chat {
        tool_id: String,
        url: String,
        model: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        temperature: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        top_p: Option<f64>,
    },
    Command {
        tool_id: String,
        command: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        output_path: Option<String>,
    },
    Mock {
        tool_id: String,
        #[serde(default)]
        rules: Vec<MockRule>,
    },
}

impl BackendConfig {
    pub fn tool_id(&self) -> &str {
        match self {
            Self::Chat { tool_id, .. } | Self::Command { tool_id, .. } | Self::Mock { tool_id, .. } => tool_id,
        }
    }

    /// Instantiates the backend. `scratch` is where compiler drivers work.
    pub fn instantiate(&self, kind: BackendKind, scratch: &Path) -> Result<SharedBackend, CampaignError> {
        Ok(match (self, kind) {
            (Self::Chat { tool_id, url, model, temperature, top_p }, BackendKind::Llm) => {
                let mut params = SamplingParams::for_model(model.clone());
                if let Some(t) = temperature {
                    params.temperature = *t;
                }
                if let Some(p) = top_p {
                    params.top_p = *p;
                }
                Arc::new(LlmBackend::new(tool_id.clone(), LlmEndpoint::from_env(url.clone()), params))
            }
            (Self::Command { tool_id, command, output_path }, BackendKind::Compiler) => Arc::new(CompilerBackend::new(
                CompilerDriverConfig {
                    tool_id: tool_id.clone(),
                    command: command.clone(),
                    output_path: output_path.clone(),
                },
                scratch,
            )),
            (Self::Mock { tool_id, rules }, kind) => Arc::new(MockBackend::new(tool_id.clone(), kind, rules.clone())),
            (other, kind) => {
                return Err(CampaignError::InvalidConfig(format!(
                    "backend `{}` cannot be used as a {kind:?} backend",
                    other.tool_id()
                )))
            }
        })
    }
}

fn default_strategies() -> Vec<PromptStrategy> {
    PromptStrategy::ALL.to_vec()
}
fn default_attempts() -> u32 {
    3
}
fn default_repeats() -> u32 {
    3
}
fn default_threads() -> u32 {
    DEFAULT_THREADS
}
fn default_buckets() -> Vec<usize> {
    vec![10, 20, 40, 80]
}
fn default_capture_timeout() -> f64 {
    60.0
}
fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub sections: Vec<SectionEntry>,
    #[serde(default)]
    pub llm_backends: Vec<BackendConfig>,
    #[serde(default)]
    pub compiler_backends: Vec<BackendConfig>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<PromptStrategy>,
    #[serde(default = "default_attempts")]
    pub attempts: u32,
    #[serde(default = "default_repeats")]
    pub timing_repeats: u32,
    #[serde(default)]
    pub tolerance: Tolerance,
    #[serde(default)]
    pub build: BuildSpec,
    #[serde(default = "default_threads")]
    pub threads: u32,
    /// Ascending upper bounds (inclusive) of the line-count buckets; one
    /// open-ended bucket follows the last.
    #[serde(default = "default_buckets")]
    pub size_buckets: Vec<usize>,
    /// Per-candidate timeout. Derived from the serial run when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_s: Option<f64>,
    #[serde(default = "default_capture_timeout")]
    pub capture_timeout_s: f64,
    /// Extra environment for every run.
    #[serde(default)]
    pub env: BTreeMap<String, String>,
    /// Concurrent backend requests.
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Section time of a hand-optimized version, keyed by section id.
    #[serde(default)]
    pub hand_optimized_ns: BTreeMap<String, u64>,
}

impl CampaignConfig {
    /// A config with the given sections and every other field defaulted.
    pub fn with_sections(sections: Vec<SectionEntry>) -> Self {
        Self {
            sections,
            llm_backends: Vec::new(),
            compiler_backends: Vec::new(),
            strategies: default_strategies(),
            attempts: default_attempts(),
            timing_repeats: default_repeats(),
            tolerance: Tolerance::default(),
            build: BuildSpec::default(),
            threads: default_threads(),
            size_buckets: default_buckets(),
            timeout_s: None,
            capture_timeout_s: default_capture_timeout(),
            env: BTreeMap::new(),
            max_in_flight: default_in_flight(),
            hand_optimized_ns: BTreeMap::new(),
        }
    }

    /// Parses a config; relative section paths are resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self, CampaignError> {
        let mut config: CampaignConfig =
            serde_json::from_str(text).map_err(|e| CampaignError::InvalidConfig(e.to_string()))?;
        for s in &mut config.sections {
            if s.source.is_relative() {
                s.source = base.join(&s.source);
            }
            if s.manifest.is_relative() {
                s.manifest = base.join(&s.manifest);
            }
        }
        for backend in config.llm_backends.iter_mut().chain(config.compiler_backends.iter_mut()) {
            if let BackendConfig::Mock { rules, .. } = backend {
                for rule in rules {
                    if let MockAction::CodeFile(p) = &mut rule.action {
                        if p.is_relative() {
                            *p = base.join(&*p);
                        }
                    }
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let text = fs::read_to_string(path).map_err(|e| CampaignError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: &str| Err(CampaignError::InvalidConfig(m.to_string()));
        if self.attempts == 0 {
            return bad("attempts must be at least 1");
        }
        if self.timing_repeats == 0 {
            return bad("timing_repeats must be at least 1");
        }
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be at least 1");
        }
        if self.size_buckets.windows(2).any(|w| w[0] >= w[1]) {
            return bad("size_buckets must be strictly ascending");
        }
        if !self.llm_backends.is_empty() && self.strategies.is_empty() {
            return bad("LLM backends need at least one strategy");
        }
        if Tolerance::new(self.tolerance.abs, self.tolerance.rel).is_none() {
            return bad("tolerance must be finite and non-negative");
        }
        let positive = |t: f64| t.is_finite() && t > 0.0;
        if self.timeout_s.is_some_and(|t| !positive(t)) || !positive(self.capture_timeout_s) {
            return bad("timeouts must be positive");
        }
        let mut seen = std::collections::BTreeSet::new();
        for b in self.llm_backends.iter().chain(&self.compiler_backends) {
            if !seen.insert(b.tool_id()) {
                return Err(CampaignError::InvalidConfig(format!("duplicate tool id `{}`", b.tool_id())));
            }
        }
        if let Some(b) = self.llm_backends.iter().find(|b| matches!(b, BackendConfig::Command { .. })) {
            return Err(CampaignError::InvalidConfig(format!("`{}`: command backends are compilers", b.tool_id())));
        }
        if let Some(b) = self.compiler_backends.iter().find(|b| matches!(b, BackendConfig::Chat { .. })) {
            return Err(CampaignError::InvalidConfig(format!("`{}`: chat backends are LLMs", b.tool_id())));
        }
        self.build.validate().map_err(|e| CampaignError::InvalidConfig(e.to_string()))
    }
}
