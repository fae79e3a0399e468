//! Rollout parsing: `<think>…</think><answer>…</answer>` into ordered steps
//! and a canonical answer string.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// One line of a rollout JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub id: String,
    pub question: String,
    pub text: String,
}

/// The full generated sample, unparsed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawRollout {
    pub text: String,
}

impl RawRollout {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }
}

/// Canonical answer string produced by [`normalize_answer`]. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormalizedAnswer(String);

impl NormalizedAnswer {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NormalizedAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRollout {
    pub steps: Vec<String>,
    pub answer: NormalizedAnswer,
    /// Verbatim content of the answer block.
    pub raw_answer: String,
    /// Whitespace tokens inside the think block.
    pub pre_answer_tokens: usize,
}

impl ParsedRollout {
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParseConfig {
    pub max_steps: usize,
    pub think_open: String,
    pub think_close: String,
    pub answer_open: String,
    pub answer_close: String,
}

impl Default for ParseConfig {
    fn default() -> Self {
        Self {
            max_steps: 8,
            think_open: "<think>".into(),
            think_close: "</think>".into(),
            answer_open: "<answer>".into(),
            answer_close: "</answer>".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("rollout has no complete think block")]
    MissingThinkBlock,
    #[error("rollout has no complete answer block")]
    MissingAnswerBlock,
    #[error("answer block is empty after normalization")]
    EmptyAnswer,
}

impl ParseError {
    /// Stable identifier used in JSON outputs.
    pub fn name(&self) -> &'static str {
        match self {
            ParseError::MissingThinkBlock => "MissingThinkBlock",
            ParseError::MissingAnswerBlock => "MissingAnswerBlock",
            ParseError::EmptyAnswer => "EmptyAnswer",
        }
    }
}

/// Returns the text strictly between `open` and the first `close` after it,
/// plus the byte offset just past `close`.
fn delimited<'a>(text: &'a str, from: usize, open: &str, close: &str) -> Option<(&'a str, usize)> {
    let start = text[from..].find(open)? + from + open.len();
    let end = text[start..].find(close)? + start;
    Some((&text[start..end], end + close.len()))
}

pub fn parse_rollout(raw: &RawRollout, cfg: &ParseConfig) -> Result<ParsedRollout, ParseError> {
    let text = raw.text.as_str();
    let (think, after_think) = delimited(text, 0, &cfg.think_open, &cfg.think_close)
        .ok_or(ParseError::MissingThinkBlock)?;
    let (raw_answer, _) = delimited(text, after_think, &cfg.answer_open, &cfg.answer_close)
        .ok_or(ParseError::MissingAnswerBlock)?;
    let answer = normalize_answer(raw_answer)?;
    Ok(ParsedRollout {
        steps: split_steps(think, cfg.max_steps),
        answer,
        raw_answer: raw_answer.to_string(),
        pre_answer_tokens: think.split_whitespace().count(),
    })
}

static STEP_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bstep\s*(\d+)\s*:").expect("valid regex"));

static ENUMERATOR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|\s)(\d+)[.)](?:\s|$)").expect("valid regex"));

/// Splits a think block into step texts.
///
/// Grammar, first match wins:
/// 1. `Step k:` markers (case-insensitive), anywhere in the text;
/// 2. enumerators `k.` / `k)` numbered consecutively from 1;
/// 3. one step per non-empty line;
/// 4. sentences ending in `.` or `;`.
///
/// Text before the first marker is not a step. Segments are trimmed, empty
/// ones dropped, and the result truncated to `max_steps`.
pub fn split_steps(think_text: &str, max_steps: usize) -> Vec<String> {
    let segments = marker_segments(think_text)
        .or_else(|| enumerator_segments(think_text))
        .unwrap_or_else(|| {
            let trimmed = think_text.trim();
            if trimmed.contains('\n') {
                trimmed.lines().map(str::to_string).collect()
            } else {
                sentence_segments(trimmed)
            }
        });
    segments
        .into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .take(max_steps)
        .collect()
}

fn cut_at(text: &str, bounds: &[(usize, usize)]) -> Vec<String> {
    // bounds are (marker_start, content_start) pairs in increasing order.
    bounds
        .iter()
        .enumerate()
        .map(|(k, &(_, content_start))| {
            let end = bounds.get(k + 1).map_or(text.len(), |&(next, _)| next);
            text[content_start..end].to_string()
        })
        .collect()
}

fn marker_segments(text: &str) -> Option<Vec<String>> {
    let bounds: Vec<_> = STEP_MARKER
        .find_iter(text)
        .map(|m| (m.start(), m.end()))
        .collect();
    (!bounds.is_empty()).then(|| cut_at(text, &bounds))
}

fn enumerator_segments(text: &str) -> Option<Vec<String>> {
    let mut expected = 1u64;
    let mut bounds = Vec::new();
    for caps in ENUMERATOR.captures_iter(text) {
        let whole = caps.get(0).expect("group 0");
        let num = caps.get(1).expect("group 1");
        if num.as_str().parse::<u64>().ok() == Some(expected) {
            // content starts right after the `.`/`)`
            bounds.push((whole.start(), num.end() + 1));
            expected += 1;
        }
    }
    (!bounds.is_empty()).then(|| cut_at(text, &bounds))
}

fn sentence_segments(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c == '.' || c == ';' {
            let at_boundary = chars.peek().is_none_or(|&(_, n)| n.is_whitespace());
            if at_boundary {
                let end = i + c.len_utf8();
                out.push(text[start..end].to_string());
                start = end;
            }
        }
    }
    if start < text.len() {
        out.push(text[start..].to_string());
    }
    out
}

const SURROUNDING_PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', '"', '\'', '(', ')'];

/// Canonicalizes an answer: lowercase, collapse whitespace, strip surrounding
/// punctuation, and render plain decimals without redundant zeros or sign.
pub fn normalize_answer(raw: &str) -> Result<NormalizedAnswer, ParseError> {
    let lowered = raw.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    let stripped = collapsed.trim_matches(|c: char| c.is_whitespace() || SURROUNDING_PUNCT.contains(&c));
    if stripped.is_empty() {
        return Err(ParseError::EmptyAnswer);
    }
    let canonical = canonical_decimal(stripped).unwrap_or_else(|| stripped.to_string());
    Ok(NormalizedAnswer(canonical))
}

/// Re-renders `[+-]?digits[.digits]` without leading `+`, leading zeros,
/// trailing fractional zeros, or a negative zero. Returns `None` for anything
/// that is not a plain finite decimal.
fn canonical_decimal(s: &str) -> Option<String> {
    let (negative, body) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int_part) || !all_digits(frac_part) {
        return None;
    }
    let int_part = int_part.trim_start_matches('0');
    let frac_part = frac_part.trim_end_matches('0');
    let int_part = if int_part.is_empty() { "0" } else { int_part };
    let is_zero = int_part == "0" && frac_part.is_empty();
    let mut out = String::with_capacity(s.len());
    if negative && !is_zero {
        out.push('-');
    }
    out.push_str(int_part);
    if !frac_part.is_empty() {
        out.push('.');
        out.push_str(frac_part);
    }
    Some(out)
}
