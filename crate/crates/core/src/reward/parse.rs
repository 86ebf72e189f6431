//! Extraction of energy lists and candidate names from free-form model replies.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error("expected {expected} numbers, recovered {found}")]
    WrongCount { expected: usize, found: usize },
    #[error("no candidate names found in answer")]
    NoCandidatesFound,
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?").unwrap())
}

fn bullet_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:\(?\d+[.)]|[-*•])\s+").unwrap())
}

/// Numbers on one line, skipping digits that belong to words (`CO2`, `Pt3Ni`, `Pt(111)`).
fn line_numbers(line: &str) -> Vec<f64> {
    let mut out = Vec::new();
    for m in number_re().find_iter(line) {
        let before = line[..m.start()].chars().next_back();
        let after = line[m.end()..].chars().next();
        let glued_before = before.is_some_and(|c| c.is_alphanumeric() || c == '.' || c == '_');
        let in_word_parens = before == Some('(')
            && line[..m.start() - 1]
                .chars()
                .next_back()
                .is_some_and(char::is_alphanumeric);
        let glued_after = after.is_some_and(|c| c.is_alphabetic())
            && !line[m.end()..].to_ascii_lowercase().starts_with("ev");
        if glued_before || in_word_parens || glued_after {
            continue;
        }
        if let Ok(v) = m.as_str().parse::<f64>() {
            out.push(v);
        }
    }
    out
}

/// Pulls exactly `expected_len` numbers out of a reply, in order.
///
/// Tolerates brackets, bullets, `name: value` lines and `eV` suffixes. Leading
/// list indices (`1.`, `2)`) are not values. When a line has a colon, only the
/// text after the last colon is read.
pub fn parse_energy_list(text: &str, expected_len: usize) -> Result<Vec<f64>, ParseError> {
    let text = text.replace('\u{2212}', "-");
    let mut values = Vec::new();
    for raw in text.lines() {
        let line = bullet_re().replace(raw, "");
        let line = match line.rfind(':') {
            Some(i) if !line_numbers(&line[i + 1..]).is_empty() => &line[i + 1..],
            _ => &line[..],
        };
        values.extend(line_numbers(line));
    }
    if values.len() != expected_len {
        return Err(ParseError::WrongCount {
            expected: expected_len,
            found: values.len(),
        });
    }
    Ok(values)
}

/// Canonical `[a, b, c]` rendering, the inverse of [`parse_energy_list`].
pub fn format_energy_list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

fn pair_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(([^()]+)\)").unwrap())
}

const NAME_STOPS: &[&str] = &[
    ":", ",", "(", " - ", " – ", " — ", " because", " due to", " which", " is ", " has ",
];

fn clean_name(item: &str) -> Option<String> {
    let mut s = item
        .trim()
        .trim_start_matches(['(', '[', '"', '\'', '*'])
        .trim();
    for stop in NAME_STOPS {
        if let Some(i) = s.find(stop) {
            s = &s[..i];
        }
    }
    let s = s
        .trim()
        .trim_matches(|c: char| matches!(c, '*' | '"' | '\'' | '.' | '`' | ')' | ']'))
        .trim();
    let words = s.split_whitespace().count();
    if s.is_empty() || words > 5 || s.len() > 60 {
        return None;
    }
    Some(s.to_string())
}

/// Catalyst names from a "list of pairs" answer, at most `k`, first occurrence wins.
///
/// Numbered or bulleted lines are read first; without any, parenthesized
/// `(name, explanation)` pairs are used.
pub fn parse_candidates(answer: &str, k: usize) -> Result<Vec<String>, ParseError> {
    let mut items: Vec<String> = answer
        .lines()
        .filter_map(|line| bullet_re().find(line).map(|m| line[m.end()..].to_string()))
        .collect();
    if items.is_empty() {
        items = pair_re()
            .captures_iter(answer)
            .map(|c| c[1].to_string())
            .collect();
    }
    let mut names: Vec<String> = Vec::new();
    for name in items.iter().filter_map(|i| clean_name(i)) {
        if names.len() == k {
            break;
        }
        if !names.contains(&name) {
            names.push(name);
        }
    }
    if names.is_empty() {
        return Err(ParseError::NoCandidatesFound);
    }
    Ok(names)
}
