//! Deterministic rule-based chat provider.
//!
//! Stands in for the LLM in tests and offline (mock-mode) pipeline runs: the
//! entire indexing/retrieval/eval loop works against it with zero network
//! traffic and byte-stable output. Requests are dispatched on distinctive
//! phrases in the system prompt, and each task follows a fixed published
//! rule:
//!
//! - **memory** — the passage text passes through with per-line whitespace
//!   collapsed; bare third-person pronoun tokens are dropped (the real
//!   prompt forbids them, so the mock's output honors the same contract).
//! - **entities** — maximal runs of capitalized tokens, allowing lowercase
//!   connectors (`of`, `de`, ...) and trailing numbers inside a run;
//!   `"Nicki Minaj was born in Port of Spain."` yields `nicki minaj` and
//!   `port of spain`. Tokens containing `[` or `]` are fixture plumbing
//!   (answer markers) and never enter a run.
//! - **triples** — lines of the form `head | relation | tail` embedded in
//!   the memory text are parsed as-is.
//! - **decomposition** — a question splits only when it contains an " or "
//!   between two trailing operands *and* a comparative keyword. Questions in
//!   the "director born later/earlier" family map to birth-year
//!   sub-questions; other comparatives get a generic per-entity probe.
//! - **answer** — the first `[ANS] ... [/ANS]` span planted in the rendered
//!   evidence, or an empty string when none exists.

use super::ChatProvider;
use crate::Result;

/// The rule-based provider. Stateless; construct freely.
#[derive(Debug, Default, Clone, Copy)]
pub struct MockProvider;

impl ChatProvider for MockProvider {
    fn complete(&self, system: &str, user: &str) -> Result<String> {
        if system.contains("memory-writing analyst") {
            Ok(mock_memory(user))
        } else if system.contains("extract named entities") {
            Ok(mock_entities(user))
        } else if system.contains("RDF") {
            Ok(mock_triples(user))
        } else if system.contains("query decomposition assistant") {
            Ok(mock_decompose(user))
        } else {
            Ok(mock_answer(user))
        }
    }

    fn name(&self) -> &'static str {
        "mock"
    }
}

const PRONOUNS: &[&str] = &[
    "he", "she", "it", "they", "him", "her", "them", "his", "hers", "its", "their", "theirs",
];

/// Lowercase tokens allowed *inside* a capitalized run.
const CONNECTORS: &[&str] = &[
    "of", "the", "de", "la", "le", "du", "da", "von", "van", "and", "for",
];

const COMPARATIVES: &[&str] = &[
    "later", "earlier", "older", "younger", "longer", "shorter", "higher", "lower", "larger",
    "smaller", "taller", "more", "fewer", "less", "same", "different", "first", "last", "better",
    "worse",
];

fn mock_memory(passage: &str) -> String {
    let mut lines = Vec::new();
    for line in passage.lines() {
        let kept: Vec<&str> = line
            .split_whitespace()
            .filter(|tok| {
                let bare = tok
                    .trim_matches(|c: char| c.is_ascii_punctuation())
                    .to_lowercase();
                !PRONOUNS.contains(&bare.as_str())
            })
            .collect();
        if !kept.is_empty() {
            lines.push(kept.join(" "));
        }
    }
    format!(
        "<think>direct factual text; pass through with light cleanup</think>\n<memory>{}</memory>",
        lines.join("\n")
    )
}

#[derive(PartialEq)]
enum TokenClass {
    /// First alphabetic character is uppercase.
    Cap,
    /// Starts with a digit; may extend a run but not start one.
    Number,
    /// Lowercase connector; may sit inside a run but not start or end one.
    Connector,
    Break,
}

fn classify(core: &str) -> TokenClass {
    if core.is_empty() || core.contains('[') || core.contains(']') {
        return TokenClass::Break;
    }
    if let Some(c) = core.chars().find(|c| c.is_alphabetic()) {
        if c.is_uppercase() {
            return TokenClass::Cap;
        }
        if CONNECTORS.contains(&core.to_lowercase().as_str()) {
            return TokenClass::Connector;
        }
        return TokenClass::Break;
    }
    if core.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        return TokenClass::Number;
    }
    TokenClass::Break
}

fn mock_entities(memory: &str) -> String {
    let mut runs: Vec<String> = Vec::new();
    for line in memory.lines() {
        let mut current: Vec<&str> = Vec::new();
        let flush = |current: &mut Vec<&str>, runs: &mut Vec<String>| {
            // A run must end on a capitalized or numeric token.
            while current
                .last()
                .is_some_and(|t| classify(t) == TokenClass::Connector)
            {
                current.pop();
            }
            if !current.is_empty() {
                runs.push(current.join(" "));
                current.clear();
            }
        };
        for token in line.split_whitespace() {
            let core = token.trim_matches(|c: char| c.is_ascii_punctuation() && c != '[' && c != ']');
            match classify(core) {
                TokenClass::Cap => current.push(core),
                TokenClass::Number | TokenClass::Connector if !current.is_empty() => {
                    current.push(core)
                }
                _ => flush(&mut current, &mut runs),
            }
        }
        flush(&mut current, &mut runs);
    }
    serde_json::to_string(&runs).expect("string list serializes")
}

fn mock_triples(user: &str) -> String {
    let mut triples: Vec<[String; 3]> = Vec::new();
    for line in user.lines() {
        let parts: Vec<&str> = line.split(" | ").map(str::trim).collect();
        if parts.len() == 3 && parts.iter().all(|p| !p.is_empty()) {
            triples.push([parts[0].into(), parts[1].into(), parts[2].into()]);
        }
    }
    serde_json::to_string(&triples).expect("triple list serializes")
}

fn mock_decompose(question: &str) -> String {
    let no_split = r#"{"split": false, "sub_questions": []}"#.to_string();
    let q = question.trim();
    let lower = q.to_lowercase();

    let words: Vec<String> = lower
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| c.is_ascii_punctuation()).to_string())
        .collect();
    let is_comparative = words.iter().any(|w| COMPARATIVES.contains(&w.as_str()));
    if !is_comparative || !lower.contains(" or ") {
        return no_split;
    }

    // Operands live in a trailing ", A or B?" clause.
    let Some(comma) = q.rfind(',') else {
        return no_split;
    };
    let tail = q[comma + 1..].trim();
    let Some(tail) = tail.strip_suffix('?') else {
        return no_split;
    };
    let Some(pos) = tail.rfind(" or ") else {
        return no_split;
    };
    let a = tail[..pos].trim();
    let b = tail[pos + 4..].trim();
    if a.is_empty() || b.is_empty() {
        return no_split;
    }

    let template = |entity: &str| -> String {
        if lower.contains("director born") {
            format!("What is the birth year of the director of {entity}?")
        } else {
            format!("What is known about {entity}?")
        }
    };
    serde_json::to_string(&serde_json::json!({
        "split": true,
        "sub_questions": [template(a), template(b)],
    }))
    .expect("decomposition serializes")
}

fn mock_answer(user: &str) -> String {
    let Some(start) = user.find("[ANS]") else {
        return String::new();
    };
    let after = &user[start + "[ANS]".len()..];
    let Some(end) = after.find("[/ANS]") else {
        return String::new();
    };
    after[..end].trim().to_string()
}
