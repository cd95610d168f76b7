//! Experimental sections and their state manifests.
//!
//! A section is the code between a start and a stop marker pragma. Two
//! spellings are recognised:
//!
//! ```c
//! #pragma experimental start            // ... #pragma experimental end
//! #pragma experimental section start    // ... #pragma experimental section stop
//! ```
//!
//! The start pragma may carry `id=NAME`. Without one the section is named
//! `<file name>:<start line>`.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pattern::PatternLabel;

/// Canonical start marker emitted by the generators.
pub const START_PRAGMA: &str = "#pragma experimental section start";
/// Canonical stop marker emitted by the generators.
pub const STOP_PRAGMA: &str = "#pragma experimental section stop";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SectionError {
    #[error("line {line}: stop pragma without a matching start")]
    UnmatchedStop { line: usize },
    #[error("line {line}: start pragma is never closed")]
    UnmatchedStart { line: usize },
    #[error("line {line}: start pragma inside the section opened on line {open}")]
    NestedSection { line: usize, open: usize },
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest parse error: {0}")]
    Parse(String),
    #[error("variable `{0}` declared more than once")]
    DuplicateVariable(String),
    #[error("manifest declares no out or inout variable")]
    NoOutputVariable,
    #[error("inconsistent parallel fields: {0}")]
    InconsistentParallelFields(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentalSection {
    pub id: String,
    pub source_path: String,
    pub start_line: usize,
    pub end_line: usize,
    pub body_text: String,
    pub line_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElemType {
    I8,
    I32,
    I64,
    F32,
    F64,
}

impl ElemType {
    pub const ALL: [ElemType; 5] = [Self::I8, Self::I32, Self::I64, Self::F32, Self::F64];

    pub fn size(self) -> usize {
        match self {
            Self::I8 => 1,
            Self::I32 | Self::F32 => 4,
            Self::I64 | Self::F64 => 8,
        }
    }

    /// Type tag used by the checkpoint wire format.
    pub fn tag(self) -> u8 {
        match self {
            Self::I8 => 0,
            Self::I32 => 1,
            Self::I64 => 2,
            Self::F32 => 3,
            Self::F64 => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag as usize).copied()
    }

    pub fn is_float(self) -> bool {
        matches!(self, Self::F32 | Self::F64)
    }

    pub fn c_type(self) -> &'static str {
        match self {
            Self::I8 => "int8_t",
            Self::I32 => "int32_t",
            Self::I64 => "int64_t",
            Self::F32 => "float",
            Self::F64 => "double",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::I8 => "i8",
            Self::I32 => "i32",
            Self::I64 => "i64",
            Self::F32 => "f32",
            Self::F64 => "f64",
        }
    }
}

impl fmt::Display for ElemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
    Inout,
}

impl Direction {
    /// Captured at section entry.
    pub fn is_input(self) -> bool {
        matches!(self, Self::In | Self::Inout)
    }

    /// Captured at section exit and compared.
    pub fn is_output(self) -> bool {
        matches!(self, Self::Out | Self::Inout)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub elem_type: ElemType,
    #[serde(default)]
    pub extents: Vec<u64>,
    pub direction: Direction,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, elem_type: ElemType, extents: Vec<u64>, direction: Direction) -> Self {
        Self { name: name.into(), elem_type, extents, direction }
    }

    pub fn is_scalar(&self) -> bool {
        self.extents.is_empty()
    }

    /// Product of the extents, `None` on overflow.
    pub fn element_count(&self) -> Option<u64> {
        self.extents.iter().try_fold(1u64, |acc, &e| acc.checked_mul(e))
    }

    pub fn byte_len(&self) -> Option<u64> {
        self.element_count()?.checked_mul(self.elem_type.size() as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NonParallelReason {
    /// Loop-carried data dependence.
    DP,
    /// Calls to functions with side effects.
    FC,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateManifest {
    pub section_id: String,
    pub parallelizable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_pattern: Option<PatternLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub non_parallel_reason: Option<NonParallelReason>,
    pub variables: Vec<VariableSpec>,
}

impl StateManifest {
    pub fn validate(&self) -> Result<(), ManifestError> {
        let mut seen = HashSet::new();
        for var in &self.variables {
            if !is_identifier(&var.name) {
                return Err(ManifestError::Parse(format!("`{}` is not a valid identifier", var.name)));
            }
            if !seen.insert(var.name.as_str()) {
                return Err(ManifestError::DuplicateVariable(var.name.clone()));
            }
            if var.extents.contains(&0) {
                return Err(ManifestError::Parse(format!("`{}` has a zero extent", var.name)));
            }
            if var.extents.len() > u8::MAX as usize {
                return Err(ManifestError::Parse(format!("`{}` has rank above 255", var.name)));
            }
            if var.byte_len().is_none() {
                return Err(ManifestError::Parse(format!("`{}` is too large", var.name)));
            }
        }
        if !self.variables.iter().any(|v| v.direction.is_output()) {
            return Err(ManifestError::NoOutputVariable);
        }
        match (self.parallelizable, self.expected_pattern, self.non_parallel_reason) {
            (true, Some(PatternLabel::None), _) => Err(ManifestError::InconsistentParallelFields(
                "expected_pattern must name one of PO, PF, PR, PA, DS, NW",
            )),
            (true, Some(_), None) => Ok(()),
            (true, None, _) => {
                Err(ManifestError::InconsistentParallelFields("parallelizable sections need expected_pattern"))
            }
            (true, _, Some(_)) => Err(ManifestError::InconsistentParallelFields(
                "parallelizable sections cannot carry non_parallel_reason",
            )),
            (false, Some(_), _) => Err(ManifestError::InconsistentParallelFields(
                "non-parallelizable sections cannot carry expected_pattern",
            )),
            (false, None, None) => {
                Err(ManifestError::InconsistentParallelFields("non-parallelizable sections need non_parallel_reason"))
            }
            (false, None, Some(_)) => Ok(()),
        }
    }

    pub fn inputs(&self) -> impl Iterator<Item = &VariableSpec> {
        self.variables.iter().filter(|v| v.direction.is_input())
    }

    pub fn outputs(&self) -> impl Iterator<Item = &VariableSpec> {
        self.variables.iter().filter(|v| v.direction.is_output())
    }

    pub fn variable(&self, name: &str) -> Option<&VariableSpec> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization is infallible")
    }

    /// Conventional file name, `<section_id>.manifest.json`.
    pub fn file_name(&self) -> String {
        format!("{}.manifest.json", self.section_id)
    }
}

pub fn load_manifest(text: &str) -> Result<StateManifest, ManifestError> {
    let manifest: StateManifest = serde_json::from_str(text).map_err(|e| ManifestError::Parse(e.to_string()))?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => chars.all(|c| c.is_ascii_alphanumeric() || c == '_'),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Marker {
    Start { id: Option<String> },
    Stop,
}

/// Classifies one source line as an experimental marker.
pub(crate) fn parse_marker(line: &str) -> Option<Marker> {
    let rest = line.trim().strip_prefix('#')?;
    let mut tokens = rest.split_whitespace();
    if tokens.next()? != "pragma" || tokens.next()? != "experimental" {
        return None;
    }
    let mut word = tokens.next()?;
    if word == "section" {
        word = tokens.next()?;
    }
    match word {
        "start" => {
            let id = tokens.find_map(|t| t.strip_prefix("id=")).filter(|s| !s.is_empty()).map(str::to_string);
            Some(Marker::Start { id })
        }
        "stop" | "end" => Some(Marker::Stop),
        _ => None,
    }
}

pub fn extract_sections(source_text: &str) -> Result<Vec<ExperimentalSection>, SectionError> {
    extract_sections_from(source_text, "<memory>")
}

/// Like [`extract_sections`], recording `source_path` on each section and
/// using its file name for default ids.
pub fn extract_sections_from(source_text: &str, source_path: &str) -> Result<Vec<ExperimentalSection>, SectionError> {
    let file_name = Path::new(source_path)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| source_path.to_string());
    let lines: Vec<&str> = source_text.lines().collect();
    let mut sections = Vec::new();
    let mut open: Option<(usize, Option<String>)> = None;

    for (idx, line) in lines.iter().enumerate() {
        let line_no = idx + 1;
        match parse_marker(line) {
            Some(Marker::Start { id }) => {
                if let Some((start, _)) = open {
                    return Err(SectionError::NestedSection { line: line_no, open: start });
                }
                open = Some((line_no, id));
            }
            Some(Marker::Stop) => {
                let (start, id) = open.take().ok_or(SectionError::UnmatchedStop { line: line_no })?;
                let body = &lines[start..line_no - 1];
                sections.push(ExperimentalSection {
                    id: id.unwrap_or_else(|| format!("{file_name}:{start}")),
                    source_path: source_path.to_string(),
                    start_line: start,
                    end_line: line_no,
                    body_text: body.join("\n"),
                    line_count: body.len(),
                });
            }
            None => {}
        }
    }
    if let Some((start, _)) = open {
        return Err(SectionError::UnmatchedStart { line: start });
    }
    Ok(sections)
}

/// Replaces characters that are awkward in file names and C string literals.
pub fn file_stem(section_id: &str) -> String {
    section_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.') { c } else { '_' })
        .collect()
}
