//! OpenMP directive scanning, challenge-pattern detection and outcome
//! categorisation.
//!
//! Loop structure comes from a brace-depth scan over a comment- and
//! string-stripped token stream. Macros that expand to braces or loops are
//! not seen.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::outcome::ValidationStatus;
use crate::sections::StateManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternLabel {
    /// Parallelised outermost loop.
    PO,
    /// Parallelised loop containing function calls.
    PF,
    /// Parallel region enclosing several worksharing loops.
    PR,
    /// Array reduction.
    PA,
    /// Dynamic scheduling.
    DS,
    /// `nowait` barrier elimination.
    NW,
    None,
}

impl PatternLabel {
    pub const DETECTABLE: [PatternLabel; 6] = [Self::PO, Self::PF, Self::PR, Self::PA, Self::DS, Self::NW];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PO => "PO",
            Self::PF => "PF",
            Self::PR => "PR",
            Self::PA => "PA",
            Self::DS => "DS",
            Self::NW => "NW",
            Self::None => "None",
        }
    }
}

impl fmt::Display for PatternLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PatternLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::DETECTABLE
            .iter()
            .chain([Self::None].iter())
            .find(|l| l.as_str() == s)
            .copied()
            .ok_or_else(|| format!("unknown pattern label `{s}`"))
    }
}

/// Renders a label set as `PO;PF`, or `None` when empty.
pub fn format_labels(labels: &BTreeSet<PatternLabel>) -> String {
    if labels.is_empty() {
        return PatternLabel::None.to_string();
    }
    labels.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(";")
}

pub fn parse_labels(text: &str) -> Result<BTreeSet<PatternLabel>, String> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(PatternLabel::from_str)
        .filter(|l| l != &Ok(PatternLabel::None))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeCategory {
    ExpectedApplied,
    UnexpectedCorrect,
    Error,
    CorrectlyRefused,
    IncorrectlyParallelized,
}

impl OutcomeCategory {
    pub const ALL: [OutcomeCategory; 5] = [
        Self::ExpectedApplied,
        Self::UnexpectedCorrect,
        Self::Error,
        Self::CorrectlyRefused,
        Self::IncorrectlyParallelized,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ExpectedApplied => "ExpectedApplied",
            Self::UnexpectedCorrect => "UnexpectedCorrect",
            Self::Error => "Error",
            Self::CorrectlyRefused => "CorrectlyRefused",
            Self::IncorrectlyParallelized => "IncorrectlyParallelized",
        }
    }
}

impl fmt::Display for OutcomeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectiveKind {
    Parallel,
    For,
    ParallelFor,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectiveInfo {
    pub line: usize,
    pub kind: DirectiveKind,
    pub clauses: Vec<(String, String)>,
    pub nesting_depth: usize,
}

impl DirectiveInfo {
    pub fn clause<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.clauses.iter().filter(move |(n, _)| n == name).map(|(_, a)| a.as_str())
    }

    fn is_standalone(&self, construct: &str) -> bool {
        self.kind == DirectiveKind::Other
            && matches!(construct, "barrier" | "flush" | "taskwait" | "taskyield" | "threadprivate" | "cancellation")
    }
}

const C_KEYWORDS: &[&str] = &[
    "auto",
    "break",
    "case",
    "char",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extern",
    "float",
    "for",
    "goto",
    "if",
    "inline",
    "int",
    "long",
    "register",
    "restrict",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "struct",
    "switch",
    "typedef",
    "union",
    "unsigned",
    "void",
    "volatile",
    "while",
    "_Bool",
    "_Alignof",
    "_Alignas",
    "_Static_assert",
    "_Generic",
    "_Atomic",
    "_Noreturn",
    "_Thread_local",
];

/// Blanks comments and string/char literals, keeping line structure.
fn strip_comments_and_strings(code: &str) -> String {
    #[derive(PartialEq)]
    enum St {
        Code,
        Line,
        Block,
        Str(char),
    }
    let mut out = String::with_capacity(code.len());
    let mut st = St::Code;
    let mut chars = code.chars().peekable();
    while let Some(c) = chars.next() {
        match st {
            St::Code => match c {
                '/' if chars.peek() == Some(&'/') => {
                    chars.next();
                    out.push_str("  ");
                    st = St::Line;
                }
                '/' if chars.peek() == Some(&'*') => {
                    chars.next();
                    out.push_str("  ");
                    st = St::Block;
                }
                '"' | '\'' => {
                    out.push(c);
                    st = St::Str(c);
                }
                _ => out.push(c),
            },
            St::Line => {
                if c == '\n' {
                    out.push('\n');
                    st = St::Code;
                } else if c == '\\' && chars.peek() == Some(&'\n') {
                    chars.next();
                    out.push_str(" \n");
                } else {
                    out.push(' ');
                }
            }
            St::Block => {
                if c == '*' && chars.peek() == Some(&'/') {
                    chars.next();
                    out.push_str("  ");
                    st = St::Code;
                } else {
                    out.push(if c == '\n' { '\n' } else { ' ' });
                }
            }
            St::Str(q) => {
                if c == '\\' {
                    out.push(' ');
                    if let Some(n) = chars.next() {
                        out.push(if n == '\n' { '\n' } else { ' ' });
                    }
                } else if c == q {
                    out.push(c);
                    st = St::Code;
                } else if c == '\n' {
                    // unterminated literal
                    out.push('\n');
                    st = St::Code;
                } else {
                    out.push(' ');
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Punct(char),
    Number,
    /// Index into the directive list.
    Pragma(usize),
}

struct Lexed {
    tokens: Vec<Tok>,
    directives: Vec<DirectiveInfo>,
    constructs: Vec<String>,
}

/// Kind, construct words and `(clause, argument)` pairs.
type ParsedDirective = (DirectiveKind, String, Vec<(String, String)>);

fn parse_directive_text(text: &str) -> Option<ParsedDirective> {
    let rest = text.trim().strip_prefix('#')?.trim_start();
    let rest = rest.strip_prefix("pragma")?;
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    let rest = rest.trim_start().strip_prefix("omp")?;
    if !(rest.is_empty() || rest.starts_with(char::is_whitespace)) {
        return None;
    }
    let mut words = Vec::new();
    let mut clauses = Vec::new();
    let mut chars = rest.char_indices().peekable();
    let bytes = rest;
    let mut in_construct = true;
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() || c == ',' {
            chars.next();
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            let mut end = i;
            while let Some(&(j, d)) = chars.peek() {
                if d.is_ascii_alphanumeric() || d == '_' {
                    end = j + d.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            let name = bytes[start..end].to_ascii_lowercase();
            while matches!(chars.peek(), Some(&(_, d)) if d.is_whitespace()) {
                chars.next();
            }
            let mut arg = None;
            if let Some(&(j, '(')) = chars.peek() {
                chars.next();
                let mut depth = 1;
                let arg_start = j + 1;
                let mut arg_end = bytes.len();
                for (k, d) in chars.by_ref() {
                    match d {
                        '(' => depth += 1,
                        ')' => {
                            depth -= 1;
                            if depth == 0 {
                                arg_end = k;
                                break;
                            }
                        }
                        _ => {}
                    }
                }
                arg = Some(bytes[arg_start..arg_end].trim().to_string());
            }
            let construct_word = matches!(
                name.as_str(),
                "parallel"
                    | "for"
                    | "do"
                    | "simd"
                    | "sections"
                    | "section"
                    | "single"
                    | "master"
                    | "masked"
                    | "critical"
                    | "atomic"
                    | "barrier"
                    | "task"
                    | "taskloop"
                    | "taskwait"
                    | "taskyield"
                    | "flush"
                    | "ordered"
                    | "target"
                    | "teams"
                    | "distribute"
                    | "loop"
                    | "threadprivate"
                    | "declare"
                    | "cancel"
                    | "cancellation"
            );
            if in_construct && arg.is_none() && construct_word {
                words.push(name);
            } else {
                in_construct = false;
                clauses.push((name, arg.unwrap_or_default()));
            }
        } else {
            chars.next();
        }
    }
    let kind = match words.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["parallel", "for", ..] => DirectiveKind::ParallelFor,
        ["parallel"] => DirectiveKind::Parallel,
        ["for", ..] => DirectiveKind::For,
        _ => DirectiveKind::Other,
    };
    Some((kind, words.join(" "), clauses))
}

fn lex(code: &str) -> Lexed {
    let stripped = strip_comments_and_strings(code);
    let lines: Vec<&str> = stripped.split('\n').collect();
    let mut tokens = Vec::new();
    let mut directives = Vec::new();
    let mut constructs = Vec::new();
    let mut depth = 0usize;
    let mut i = 0;
    while i < lines.len() {
        let line_no = i + 1;
        if lines[i].trim_start().starts_with('#') {
            // join backslash continuations
            let mut text = String::new();
            while i < lines.len() {
                let l = lines[i].trim_end();
                if let Some(head) = l.strip_suffix('\\') {
                    text.push_str(head);
                    text.push(' ');
                    i += 1;
                } else {
                    text.push_str(l);
                    i += 1;
                    break;
                }
            }
            if let Some((kind, construct, clauses)) = parse_directive_text(&text) {
                tokens.push(Tok::Pragma(directives.len()));
                directives.push(DirectiveInfo { line: line_no, kind, clauses, nesting_depth: depth });
                constructs.push(construct);
            }
            continue;
        }
        let mut chars = lines[i].chars().peekable();
        while let Some(c) = chars.next() {
            if c.is_ascii_alphabetic() || c == '_' {
                let mut ident = String::from(c);
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        ident.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                tokens.push(Tok::Ident(ident));
            } else if c.is_ascii_digit() {
                while matches!(chars.peek(), Some(d) if d.is_ascii_alphanumeric() || *d == '.' || *d == '_') {
                    chars.next();
                }
                tokens.push(Tok::Number);
            } else if !c.is_whitespace() {
                match c {
                    '{' => depth += 1,
                    '}' => depth = depth.saturating_sub(1),
                    _ => {}
                }
                tokens.push(Tok::Punct(c));
            }
        }
        i += 1;
    }
    Lexed { tokens, directives, constructs }
}

pub fn scan_directives(code: &str) -> Vec<DirectiveInfo> {
    lex(code).directives
}

#[derive(Debug, Clone)]
struct Loop {
    /// Token range of the loop body (after the header).
    body: (usize, usize),
    depth: usize,
}

struct Structure<'a> {
    toks: &'a [Tok],
    lexed: &'a Lexed,
    loops: Vec<(usize, Loop)>,
    /// directive index -> token range of the statement it applies to.
    attached: Vec<Option<(usize, usize)>>,
}

impl<'a> Structure<'a> {
    fn is_punct(&self, i: usize, c: char) -> bool {
        matches!(self.toks.get(i), Some(Tok::Punct(p)) if *p == c)
    }

    fn is_ident(&self, i: usize, s: &str) -> bool {
        matches!(self.toks.get(i), Some(Tok::Ident(id)) if id == s)
    }

    /// Index just past the bracket matching the opener at `i`.
    fn matching(&self, i: usize, open: char, close: char) -> usize {
        let mut depth = 0usize;
        let mut j = i;
        while j < self.toks.len() {
            if self.is_punct(j, open) {
                depth += 1;
            } else if self.is_punct(j, close) {
                depth -= 1;
                if depth == 0 {
                    return j + 1;
                }
            }
            j += 1;
        }
        self.toks.len()
    }

    fn block(&mut self, mut i: usize, end: usize, loop_depth: usize) {
        while i < end {
            let next = self.statement(i, end, loop_depth);
            i = if next > i { next } else { i + 1 };
        }
    }

    fn statement(&mut self, i: usize, end: usize, loop_depth: usize) -> usize {
        if i >= end {
            return end;
        }
        match &self.toks[i] {
            Tok::Pragma(d) => {
                let d = *d;
                if self.lexed.directives[d].is_standalone(&self.lexed.constructs[d]) {
                    return i + 1;
                }
                let e = self.statement(i + 1, end, loop_depth);
                self.attached[d] = Some((i + 1, e));
                e
            }
            Tok::Punct('{') => {
                let close = self.matching(i, '{', '}').min(end);
                let inner_end = if self.is_punct(close - 1, '}') && close - 1 > i { close - 1 } else { close };
                self.block(i + 1, inner_end, loop_depth);
                close
            }
            Tok::Ident(kw) if kw == "for" || kw == "while" => {
                if !self.is_punct(i + 1, '(') {
                    return self.simple(i, end);
                }
                let header_end = self.matching(i + 1, '(', ')').min(end);
                let e = self.statement(header_end, end, loop_depth + 1);
                if kw == "for" {
                    self.loops.push((i, Loop { body: (header_end, e), depth: loop_depth }));
                }
                e
            }
            Tok::Ident(kw) if kw == "do" => {
                let mut e = self.statement(i + 1, end, loop_depth + 1);
                if self.is_ident(e, "while") && self.is_punct(e + 1, '(') {
                    e = self.matching(e + 1, '(', ')').min(end);
                    if self.is_punct(e, ';') {
                        e += 1;
                    }
                }
                e
            }
            Tok::Ident(kw) if kw == "if" || kw == "switch" => {
                if !self.is_punct(i + 1, '(') {
                    return self.simple(i, end);
                }
                let header_end = self.matching(i + 1, '(', ')').min(end);
                let mut e = self.statement(header_end, end, loop_depth);
                if kw == "if" && self.is_ident(e, "else") {
                    e = self.statement(e + 1, end, loop_depth);
                }
                e
            }
            Tok::Ident(kw) if kw == "else" => self.statement(i + 1, end, loop_depth),
            _ => self.simple(i, end),
        }
    }

    /// Expression/declaration statement: runs to `;` at bracket depth 0.
    /// Stops before `{` that follows `)` (function definition body).
    fn simple(&mut self, i: usize, end: usize) -> usize {
        let mut depth = 0i64;
        let mut j = i;
        while j < end {
            match &self.toks[j] {
                Tok::Punct('(') | Tok::Punct('[') => depth += 1,
                Tok::Punct(')') | Tok::Punct(']') => depth -= 1,
                Tok::Punct('{') => {
                    if depth == 0 && j > i && self.is_punct(j - 1, ')') {
                        return j;
                    }
                    depth += 1;
                }
                Tok::Punct('}') => {
                    if depth == 0 {
                        return j;
                    }
                    depth -= 1;
                }
                Tok::Punct(';') if depth == 0 => return j + 1,
                Tok::Pragma(_) if depth == 0 => return j,
                _ => {}
            }
            j += 1;
        }
        end
    }
}

/// Detection result with enough context to categorise.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub labels: BTreeSet<PatternLabel>,
    /// Number of `#pragma omp` directives present.
    pub directive_count: usize,
}

impl Detection {
    pub fn parallelized(&self) -> bool {
        self.directive_count > 0
    }
}

fn contains_call(toks: &[Tok]) -> bool {
    toks.windows(2).any(|w| match (&w[0], &w[1]) {
        (Tok::Ident(name), Tok::Punct('(')) => !C_KEYWORDS.contains(&name.as_str()) && !name.starts_with("omp_"),
        _ => false,
    })
}

pub fn analyze(code: &str) -> Detection {
    let lexed = lex(code);
    let mut st = Structure {
        toks: &lexed.tokens,
        lexed: &lexed,
        loops: Vec::new(),
        attached: vec![None; lexed.directives.len()],
    };
    st.block(0, lexed.tokens.len(), 0);
    let loops = std::mem::take(&mut st.loops);
    let attached = std::mem::take(&mut st.attached);
    let toks = &lexed.tokens;

    let min_depth = loops.iter().map(|(_, l)| l.depth).min();
    let loop_at = |start: usize| -> Option<&Loop> {
        // first loop keyword at the start of the attached statement
        loops.iter().find(|(kw, _)| *kw == start).map(|(_, l)| l)
    };
    let directive_token = |d: usize| toks.iter().position(|t| *t == Tok::Pragma(d)).unwrap_or(0);

    let mut labels = BTreeSet::new();
    for (d, info) in lexed.directives.iter().enumerate() {
        let target = attached[d];
        match info.kind {
            DirectiveKind::ParallelFor | DirectiveKind::For => {
                if let Some(lp) = target.and_then(|(s, _)| loop_at(s)) {
                    if info.kind == DirectiveKind::ParallelFor && Some(lp.depth) == min_depth {
                        labels.insert(PatternLabel::PO);
                    }
                    if contains_call(&toks[lp.body.0..lp.body.1]) {
                        labels.insert(PatternLabel::PF);
                    }
                }
            }
            DirectiveKind::Parallel => {
                if let Some((s, e)) = target {
                    let inner: Vec<usize> = (0..lexed.directives.len())
                        .filter(|&k| lexed.directives[k].kind == DirectiveKind::For)
                        .filter(|&k| (s..e).contains(&directive_token(k)))
                        .collect();
                    if inner.len() >= 2 {
                        labels.insert(PatternLabel::PR);
                    } else if let [only] = inner.as_slice() {
                        let on_min = attached[*only].and_then(|(s, _)| loop_at(s)).map(|l| Some(l.depth) == min_depth);
                        if on_min == Some(true) {
                            labels.insert(PatternLabel::PO);
                        }
                    }
                }
            }
            DirectiveKind::Other => {}
        }
        for (name, arg) in &info.clauses {
            match name.as_str() {
                "reduction" => {
                    let items = arg.split_once(':').map(|(_, items)| items).unwrap_or("");
                    if items.contains('[') {
                        labels.insert(PatternLabel::PA);
                    }
                }
                "schedule" if arg.trim_start().to_ascii_lowercase().starts_with("dynamic") => {
                    labels.insert(PatternLabel::DS);
                }
                "nowait" => {
                    labels.insert(PatternLabel::NW);
                }
                _ => {}
            }
        }
    }
    Detection { labels, directive_count: lexed.directives.len() }
}

pub fn detect(code: &str) -> BTreeSet<PatternLabel> {
    analyze(code).labels
}

pub fn categorize(manifest: &StateManifest, detection: &Detection, status: ValidationStatus) -> OutcomeCategory {
    let passed = status == ValidationStatus::Pass;
    if manifest.parallelizable {
        if !passed {
            OutcomeCategory::Error
        } else if manifest.expected_pattern.is_some_and(|p| detection.labels.contains(&p)) {
            OutcomeCategory::ExpectedApplied
        } else {
            OutcomeCategory::UnexpectedCorrect
        }
    } else if passed && detection.labels.is_empty() && !detection.parallelized() {
        OutcomeCategory::CorrectlyRefused
    } else {
        OutcomeCategory::IncorrectlyParallelized
    }
}
