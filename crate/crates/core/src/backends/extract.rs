use super::BackendError;

/// Contents of every fenced block in `text`, in order.
fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        // info string runs to the end of the line
        let Some(nl) = after.find('\n') else { break };
        let body = &after[nl + 1..];
        match body.find("```") {
            Some(close) => {
                blocks.push(&body[..close]);
                rest = &body[close + 3..];
            }
            None => {
                blocks.push(body);
                break;
            }
        }
    }
    blocks
}

fn trim_blank_lines(s: &str) -> &str {
    let start = s
        .char_indices()
        .take_while(|(_, c)| c.is_whitespace())
        .filter(|(_, c)| *c == '\n')
        .last()
        .map(|(i, _)| i + 1)
        .unwrap_or(0);
    let s = &s[start..];
    s.trim_end()
}

/// Picks the code out of a model response.
///
/// Among fenced blocks, the longest one mentioning `for` or `#pragma omp`
/// wins, else the longest block. Without fences the whole response is used.
pub fn extract_code(response_text: &str) -> Result<String, BackendError> {
    let blocks = fenced_blocks(response_text);
    let chosen = if blocks.is_empty() {
        response_text
    } else {
        let relevant = |b: &&str| b.contains("for") || b.contains("#pragma omp");
        fn longest<'a>(it: impl Iterator<Item = &'a str>) -> Option<&'a str> {
            it.fold(None, |best, b| match best {
                Some(x) if x.len() >= b.len() => Some(x),
                _ => Some(b),
            })
        }
        longest(blocks.iter().copied().filter(relevant)).or_else(|| longest(blocks.iter().copied())).unwrap_or("")
    };
    let code = trim_blank_lines(chosen);
    if code.trim().is_empty() {
        return Err(BackendError::EmptyResponse);
    }
    Ok(code.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_fence() {
        assert_eq!(extract_code("text ```c\nX\n``` more").unwrap(), "X");
    }

    #[test]
    fn prefers_relevant_block() {
        let r = "First:\n```\nint helper_with_a_really_long_name_here = 0;\n```\nThen\n```c\n#pragma omp parallel\nx();\n```\n";
        assert_eq!(extract_code(r).unwrap(), "#pragma omp parallel\nx();");
    }

    #[test]
    fn longest_relevant_wins() {
        let r = "```c\nfor(;;);\n```\n```c\nfor (i = 0; i < n; i++) a[i] = 0;\n```";
        assert_eq!(extract_code(r).unwrap(), "for (i = 0; i < n; i++) a[i] = 0;");
    }

    #[test]
    fn unfenced_and_empty() {
        assert_eq!(extract_code("\n\n  a = 1;\n\n").unwrap(), "  a = 1;");
        assert!(matches!(extract_code(""), Err(BackendError::EmptyResponse)));
        assert!(matches!(extract_code("```c\n\n```"), Err(BackendError::EmptyResponse)));
    }

    #[test]
    fn unterminated_fence_takes_rest() {
        assert_eq!(extract_code("```c\nfor(;;) x();\n").unwrap(), "for(;;) x();");
    }
}
