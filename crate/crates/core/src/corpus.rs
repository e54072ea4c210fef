//! Corpus loading and passage segmentation.
//!
//! Documents arrive as line-delimited JSON and are cut into passages at
//! paragraph boundaries, greedily merged up to a whitespace-token budget.
//! Paragraphs that alone exceed the budget fall back to sentence splits, and
//! a single runaway sentence is hard-chunked so the cap always holds.
//! Segmentation is pure and deterministic; a pre-chunked corpus (one
//! passage-sized record per line) passes through unchanged apart from
//! whitespace normalization.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Smallest permitted passage budget; below this, segmentation degenerates
/// into shredding sentences.
pub const MIN_MAX_TOKENS: usize = 32;

/// Default passage budget in whitespace tokens.
pub const DEFAULT_MAX_TOKENS: usize = 256;

/// A source document prior to segmentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: Option<String>,
    pub text: String,
}

/// A token-capped slice of a document; the retrieval unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub doc_id: String,
    /// Position within the parent document, contiguous from 0.
    pub ordinal: usize,
    pub text: String,
}

/// Supported corpus file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// One JSON object per line: `{"id", "title", "text"}`; `id` and `title`
    /// optional, `text` required.
    Jsonl,
}

#[derive(Deserialize)]
struct RawDocument {
    id: Option<String>,
    title: Option<String>,
    text: Option<String>,
}

/// Loads a corpus file. Blank lines are skipped; records missing `text` or
/// containing invalid JSON fail with the offending line number. Records
/// without an `id` get a deterministic `doc-<line>` identifier.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Document>> {
    let CorpusFormat::Jsonl = format;
    let display = path.display().to_string();
    let file = File::open(path)?;
    let reader = BufReader::new(file);

    let mut docs = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument =
            serde_json::from_str(&line).map_err(|e| Error::CorpusFormat {
                path: display.clone(),
                line: line_no,
                msg: format!("invalid JSON record: {e}"),
            })?;
        let text = match raw.text {
            Some(t) if !t.trim().is_empty() => t,
            _ => {
                return Err(Error::CorpusFormat {
                    path: display,
                    line: line_no,
                    msg: "record has no usable `text` field".into(),
                })
            }
        };
        let doc_id = raw.id.unwrap_or_else(|| format!("doc-{line_no}"));
        if !seen.insert(doc_id.clone()) {
            return Err(Error::CorpusFormat {
                path: display,
                line: line_no,
                msg: format!("duplicate document id `{doc_id}`"),
            });
        }
        docs.push(Document {
            doc_id,
            title: raw.title,
            text,
        });
    }
    Ok(docs)
}

/// Splits a document into passages of at most `max_tokens` whitespace tokens.
///
/// Paragraphs (blank-line separated) are the primary unit; adjacent
/// paragraphs merge greedily while the budget allows. Line structure inside a
/// paragraph survives — downstream extraction is line-oriented — but runs of
/// spaces collapse. Errors on an all-whitespace document or a budget below
/// [`MIN_MAX_TOKENS`].
pub fn segment(document: &Document, max_tokens: usize) -> Result<Vec<Passage>> {
    if max_tokens < MIN_MAX_TOKENS {
        return Err(Error::InvalidInput(format!(
            "max_tokens={max_tokens} is below the minimum of {MIN_MAX_TOKENS}"
        )));
    }
    if document.text.trim().is_empty() {
        return Err(Error::InvalidInput(format!(
            "document `{}` has no text to segment",
            document.doc_id
        )));
    }

    // Paragraph units, each possibly re-split to fit the budget.
    let mut units: Vec<String> = Vec::new();
    for para in paragraphs(&document.text) {
        if token_count(&para) <= max_tokens {
            units.push(para);
        } else {
            units.extend(split_oversized(&para, max_tokens));
        }
    }

    // Greedy merge of adjacent units up to the budget.
    let mut texts: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut current_tokens = 0usize;
    for unit in units {
        let t = token_count(&unit);
        if current_tokens > 0 && current_tokens + t <= max_tokens {
            current.push_str("\n\n");
            current.push_str(&unit);
            current_tokens += t;
        } else {
            if !current.is_empty() {
                texts.push(std::mem::take(&mut current));
            }
            current = unit;
            current_tokens = t;
        }
    }
    if !current.is_empty() {
        texts.push(current);
    }

    Ok(texts
        .into_iter()
        .enumerate()
        .map(|(ordinal, text)| Passage {
            passage_id: format!("{}#{:04}", document.doc_id, ordinal),
            doc_id: document.doc_id.clone(),
            ordinal,
            text,
        })
        .collect())
}

/// Whitespace token count; the unit of every budget in this module.
pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Blank-line separated paragraphs with per-line whitespace collapsed.
fn paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut lines: Vec<String> = Vec::new();
    for line in text.lines() {
        let collapsed = line.split_whitespace().collect::<Vec<_>>().join(" ");
        if collapsed.is_empty() {
            if !lines.is_empty() {
                out.push(lines.join("\n"));
                lines.clear();
            }
        } else {
            lines.push(collapsed);
        }
    }
    if !lines.is_empty() {
        out.push(lines.join("\n"));
    }
    out
}

/// Sentence-level fallback for a paragraph that exceeds the budget on its
/// own. Sentences are greedily merged; a sentence longer than the budget is
/// hard-chunked at token boundaries so the postcondition holds regardless.
fn split_oversized(paragraph: &str, max_tokens: usize) -> Vec<String> {
    let mut pieces = Vec::new();
    let mut current = String::new();
    let mut current_tokens = 0usize;

    let flush = |current: &mut String, current_tokens: &mut usize, pieces: &mut Vec<String>| {
        if !current.is_empty() {
            pieces.push(std::mem::take(current));
            *current_tokens = 0;
        }
    };

    for sentence in sentences(paragraph) {
        let t = token_count(&sentence);
        if t > max_tokens {
            flush(&mut current, &mut current_tokens, &mut pieces);
            let tokens: Vec<&str> = sentence.split_whitespace().collect();
            for chunk in tokens.chunks(max_tokens) {
                pieces.push(chunk.join(" "));
            }
        } else if current_tokens + t <= max_tokens {
            if !current.is_empty() {
                current.push(' ');
            }
            current.push_str(&sentence);
            current_tokens += t;
        } else {
            flush(&mut current, &mut current_tokens, &mut pieces);
            current = sentence;
            current_tokens = t;
        }
    }
    flush(&mut current, &mut current_tokens, &mut pieces);
    pieces
}

/// Naive sentence boundaries: a terminator (`.`, `!`, `?`) followed by
/// whitespace or end of text.
fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        if matches!(c, '.' | '!' | '?')
            && chars.peek().map_or(true, |n| n.is_whitespace())
        {
            let s = current.trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            current.clear();
        }
    }
    let tail = current.trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}
