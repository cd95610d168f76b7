use serde::{Deserialize, Serialize};

use super::{CampaignConfig, CampaignError};
use crate::backends::{BackendKind, Origin};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Task {
    /// Build and run the instrumented original program.
    Capture {
        section: usize,
    },
    /// Replay the untransformed body for the baseline time.
    Serial {
        section: usize,
    },
    Candidate {
        section: usize,
        origin: Origin,
        kind: BackendKind,
    },
}

impl Task {
    pub fn section(&self) -> usize {
        match self {
            Task::Capture { section } | Task::Serial { section } | Task::Candidate { section, .. } => *section,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub sections: usize,
    /// Candidates plus the serial original.
    pub versions_per_section: usize,
    pub candidates_per_section: usize,
    pub llm_attempts: usize,
    pub compiler_runs: usize,
    pub tasks: Vec<Task>,
}

impl ExperimentPlan {
    pub fn candidates(&self, section: usize) -> impl Iterator<Item = (&Origin, BackendKind)> {
        self.tasks.iter().filter_map(move |t| match t {
            Task::Candidate { section: s, origin, kind } if *s == section => Some((origin, *kind)),
            _ => None,
        })
    }
}

/// Candidate origins for one section, LLM attempts first.
pub fn candidate_origins(config: &CampaignConfig) -> Vec<(Origin, BackendKind)> {
    let mut out = Vec::new();
    for llm in &config.llm_backends {
        for &strategy in &config.strategies {
            for attempt in 1..=config.attempts {
                out.push((Origin::llm(llm.tool_id(), strategy, attempt), BackendKind::Llm));
            }
        }
    }
    for c in &config.compiler_backends {
        out.push((Origin::compiler(c.tool_id()), BackendKind::Compiler));
    }
    out
}

/// Expands the experiment matrix. Reads nothing from disk.
pub fn plan(config: &CampaignConfig) -> Result<ExperimentPlan, CampaignError> {
    config.validate()?;
    if config.sections.is_empty() {
        return Err(CampaignError::EmptyCampaign);
    }
    let origins = candidate_origins(config);
    let n = config.sections.len();
    let mut tasks = Vec::with_capacity(n * (origins.len() + 2));
    for section in 0..n {
        tasks.push(Task::Capture { section });
        tasks.push(Task::Serial { section });
        tasks.extend(origins.iter().map(|(origin, kind)| Task::Candidate {
            section,
            origin: origin.clone(),
            kind: *kind,
        }));
    }
    let per_llm = config.strategies.len() * config.attempts as usize;
    Ok(ExperimentPlan {
        sections: n,
        versions_per_section: origins.len() + 1,
        candidates_per_section: origins.len(),
        llm_attempts: n * per_llm * config.llm_backends.len(),
        compiler_runs: n * config.compiler_backends.len(),
        tasks,
    })
}
