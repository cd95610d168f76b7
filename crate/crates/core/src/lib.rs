//! Correctness and speedup harness for optimizer-produced code, applied to
//! pragma-delimited sections of C programs.

pub mod backends;
pub mod campaign;
pub mod checkpoint;
pub mod cli;
pub mod instrument;
pub mod outcome;
pub mod pattern;
pub mod runner;
pub mod sections;

pub use checkpoint::{compare, Checkpoint, ComparisonReport, ComparisonStatus, Tolerance, VarRecord};
pub use outcome::ValidationStatus;
pub use pattern::{categorize, detect, OutcomeCategory, PatternLabel};
pub use sections::{extract_sections, load_manifest, ExperimentalSection, StateManifest};
