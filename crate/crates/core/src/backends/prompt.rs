use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const IP_TEXT: &str = "Given the program below, improve its performance using OpenMP.";

pub const DIP_TEXT: &str = "Given the C program below, check for read after write and write after read \
dependencies among iterations, if there are no dependencies among iterations of the outermost loop, \
parallelize this loop using OpenMP directives. If dependencies are found in the outermost loop but there \
exist inner loops that can be parallelized without violating data dependencies, then parallelize those \
inner loops instead.";

pub const COT_SUFFIX: &str = " As you work through the program, explain each step of your reasoning process \
to ensure clarity and correctness in your optimization decisions. Think step by step.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PromptStrategy {
    /// Simple instruction.
    IP,
    /// Detailed instruction naming the dependence checks and loop priority.
    DIP,
    /// Detailed instruction plus a request for step-by-step reasoning.
    CoT,
}

impl PromptStrategy {
    pub const ALL: [PromptStrategy; 3] = [Self::IP, Self::DIP, Self::CoT];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::IP => "IP",
            Self::DIP => "DIP",
            Self::CoT => "CoT",
        }
    }

    /// Instruction text without the code.
    pub fn template(self) -> String {
        match self {
            Self::IP => IP_TEXT.to_string(),
            Self::DIP => DIP_TEXT.to_string(),
            Self::CoT => format!("{DIP_TEXT}{COT_SUFFIX}"),
        }
    }
}

impl fmt::Display for PromptStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| format!("unknown prompt strategy `{s}`"))
    }
}

/// The instruction for `strategy`, a blank line, then the section code.
pub fn render_prompt(strategy: PromptStrategy, section_code: &str) -> String {
    format!("{}\n\n{}", strategy.template(), section_code)
}
