use std::fmt;

use serde::{Deserialize, Serialize};

/// Final validation status of one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValidationStatus {
    Pass,
    CompileError,
    RuntimeError,
    Timeout,
    NumericMismatch,
    ExtractionError,
}

impl ValidationStatus {
    pub const ALL: [ValidationStatus; 6] = [
        Self::Pass,
        Self::CompileError,
        Self::RuntimeError,
        Self::Timeout,
        Self::NumericMismatch,
        Self::ExtractionError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "Pass",
            Self::CompileError => "CompileError",
            Self::RuntimeError => "RuntimeError",
            Self::Timeout => "Timeout",
            Self::NumericMismatch => "NumericMismatch",
            Self::ExtractionError => "ExtractionError",
        }
    }
}

impl fmt::Display for ValidationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
