//! Answer and retrieval metrics.
//!
//! Answer scoring follows the usual extractive-QA conventions: normalize
//! (lowercase, strip punctuation and English articles, collapse
//! whitespace), then exact match and token-level F1, each taken as the
//! maximum over the gold answer set. Retrieval is measured as Recall@K
//! against gold passage ids, with an answer-containment fallback for
//! datasets that only ship gold answers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Test cases
// ---------------------------------------------------------------------------

/// One evaluation question as stored on disk (JSONL, one object per line).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAExample {
    pub question: String,
    /// Acceptable gold answers; scoring takes the best match.
    #[serde(rename = "answers")]
    pub gold_answers: Vec<String>,
    /// Gold supporting passages, when the dataset provides them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_passage_ids: Option<Vec<String>>,
}

/// Loads a JSONL question file; blank lines are skipped, anything else
/// malformed is a line-numbered error.
pub fn load_queries(path: &Path) -> Result<Vec<QAExample>> {
    let reader = BufReader::new(File::open(path)?);
    let mut examples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let example: QAExample =
            serde_json::from_str(&line).map_err(|e| Error::CorpusFormat {
                path: path.display().to_string(),
                line: i + 1,
                msg: e.to_string(),
            })?;
        if example.question.trim().is_empty() {
            return Err(Error::CorpusFormat {
                path: path.display().to_string(),
                line: i + 1,
                msg: "question is empty".into(),
            });
        }
        examples.push(example);
    }
    Ok(examples)
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Canonical answer form: Unicode lowercase, ASCII punctuation deleted,
/// article tokens (`a`, `an`, `the`) removed, whitespace collapsed.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let depunct: String = lowered
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    depunct
        .split_whitespace()
        .filter(|tok| !matches!(*tok, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Tokens of the normalized form (possibly empty).
pub fn answer_tokens(text: &str) -> Vec<String> {
    normalize_answer(text)
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

// ---------------------------------------------------------------------------
// Per-example metrics
// ---------------------------------------------------------------------------

/// Exact match after normalization, best over the gold set.
pub fn exact_match(prediction: &str, golds: &[String]) -> bool {
    let p = normalize_answer(prediction);
    golds.iter().any(|g| normalize_answer(g) == p)
}

/// Token-level F1 against one gold answer. Multiset token overlap: two
/// empty answers agree perfectly, one empty side scores zero.
fn f1_single(prediction: &str, gold: &str) -> f64 {
    let p = answer_tokens(prediction);
    let g = answer_tokens(gold);
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    if p.is_empty() || g.is_empty() {
        return 0.0;
    }
    let mut gold_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for tok in &g {
        *gold_counts.entry(tok).or_insert(0) += 1;
    }
    let mut overlap = 0usize;
    for tok in &p {
        if let Some(c) = gold_counts.get_mut(tok.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / p.len() as f64;
    let recall = overlap as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Token F1, best over the gold set.
pub fn f1(prediction: &str, golds: &[String]) -> f64 {
    golds
        .iter()
        .map(|g| f1_single(prediction, g))
        .fold(0.0, f64::max)
}

/// How retrieval hits are credited when several golds exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecallMode {
    /// Fraction of distinct gold passages inside the top K (the default).
    Fraction,
    /// 1.0 if any gold passage made the top K, else 0.0.
    AnyHit,
}

/// Recall@K of `retrieved` (rank order, best first) against the gold ids.
/// Duplicate golds are collapsed first. An empty gold set scores zero —
/// there is nothing retrievable to credit.
pub fn recall_at_k(retrieved: &[String], golds: &[String], k: usize, mode: RecallMode) -> f64 {
    let gold_set: std::collections::BTreeSet<&str> =
        golds.iter().map(String::as_str).collect();
    if gold_set.is_empty() {
        return 0.0;
    }
    let hits = retrieved
        .iter()
        .take(k)
        .filter(|id| gold_set.contains(id.as_str()))
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    match mode {
        RecallMode::Fraction => hits as f64 / gold_set.len() as f64,
        RecallMode::AnyHit => {
            if hits > 0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Derives gold passage ids by answer containment: a passage is gold if its
/// normalized text contains any normalized gold answer as a substring.
/// The fallback when a dataset ships answers but no passage labels.
pub fn answer_containment_golds<'a>(
    golds: &[String],
    passages: impl Iterator<Item = (&'a str, &'a str)>,
) -> Vec<String> {
    let normalized: Vec<String> = golds
        .iter()
        .map(|g| normalize_answer(g))
        .filter(|g| !g.is_empty())
        .collect();
    if normalized.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (id, text) in passages {
        let hay = normalize_answer(text);
        if normalized.iter().any(|g| hay.contains(g.as_str())) {
            out.push(id.to_string());
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Scores for a single evaluated example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleEval {
    pub question: String,
    pub prediction: String,
    pub em: bool,
    pub f1: f64,
    /// Recall@K per requested K (absent when no golds were available).
    pub recall_at: BTreeMap<usize, f64>,
}

/// Corpus-level report; all rates are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_examples: usize,
    pub em: f64,
    pub f1: f64,
    /// Mean Recall@K per requested K, over examples that had golds.
    pub recall_at: BTreeMap<usize, f64>,
    /// How many examples contributed to the recall means.
    pub n_with_gold_passages: usize,
    pub recall_mode: RecallMode,
}

/// One example's inputs to [`evaluate`].
#[derive(Debug, Clone)]
pub struct EvalCase {
    pub example: QAExample,
    pub prediction: String,
    /// Ranked retrieved passage ids, best first.
    pub retrieved: Vec<String>,
    /// Resolved gold passage ids (dataset-provided or containment-derived).
    pub gold_passage_ids: Vec<String>,
}

/// Aggregates per-example metrics into a report.
///
/// Sums are taken over scores sorted ascending, which makes the aggregate
/// independent of example order down to the last bit.
pub fn evaluate(
    cases: &[EvalCase],
    recall_ks: &[usize],
    mode: RecallMode,
) -> Result<(EvalReport, Vec<ExampleEval>)> {
    if cases.is_empty() {
        return Err(Error::InvalidInput("nothing to evaluate".into()));
    }
    if recall_ks.iter().any(|&k| k == 0) {
        return Err(Error::InvalidInput("recall cutoffs must be positive".into()));
    }

    let mut per_example = Vec::with_capacity(cases.len());
    let mut f1_scores = Vec::with_capacity(cases.len());
    let mut em_count = 0usize;
    let mut recall_scores: BTreeMap<usize, Vec<f64>> =
        recall_ks.iter().map(|&k| (k, Vec::new())).collect();
    let mut n_with_gold = 0usize;

    for case in cases {
        let em = exact_match(&case.prediction, &case.example.gold_answers);
        let f1_score = f1(&case.prediction, &case.example.gold_answers);
        em_count += usize::from(em);
        f1_scores.push(f1_score);

        let mut recall_at = BTreeMap::new();
        if !case.gold_passage_ids.is_empty() {
            n_with_gold += 1;
            for &k in recall_ks {
                let r = recall_at_k(&case.retrieved, &case.gold_passage_ids, k, mode);
                recall_at.insert(k, r);
                recall_scores.get_mut(&k).unwrap().push(r);
            }
        }
        per_example.push(ExampleEval {
            question: case.example.question.clone(),
            prediction: case.prediction.clone(),
            em,
            f1: f1_score,
            recall_at,
        });
    }

    let ordered_mean = |mut xs: Vec<f64>| -> f64 {
        if xs.is_empty() {
            return 0.0;
        }
        let n = xs.len() as f64;
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.iter().sum::<f64>() / n
    };

    let report = EvalReport {
        n_examples: cases.len(),
        em: 100.0 * em_count as f64 / cases.len() as f64,
        f1: 100.0 * ordered_mean(f1_scores),
        recall_at: recall_scores
            .into_iter()
            .map(|(k, xs)| (k, 100.0 * ordered_mean(xs)))
            .collect(),
        n_with_gold_passages: n_with_gold,
        recall_mode: mode,
    };
    Ok((report, per_example))
}
