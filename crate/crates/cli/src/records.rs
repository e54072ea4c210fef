//! Machine-readable output shapes.
//!
//! Everything printed to stdout or written to report files serializes from
//! these structs, so field order is fixed by the definitions and two runs
//! over the same store produce byte-identical output. Timings and other
//! run-varying facts are logged instead — they never enter these records.

use std::collections::BTreeMap;

use serde::Serialize;

/// One evidence passage in rank order, with both raw channels and the blend.
#[derive(Debug, Clone, Serialize)]
pub struct EvidenceRecord {
    pub rank: usize,
    pub passage_id: String,
    pub s_diff: f64,
    pub s_sim: f64,
    pub s_fused: f64,
    pub memory_id: String,
    pub memory_text: String,
    pub passage_text: String,
}

/// Per-sub-query diagnostics carried in retrieval output.
#[derive(Debug, Clone, Serialize)]
pub struct SubQueryRecord {
    pub sub_query: String,
    /// True when no entity anchored the walk and ranking fell back to the
    /// dense channel alone.
    pub dense_fallback: bool,
    pub walk_converged: bool,
    pub walk_iterations: usize,
    pub candidates: usize,
}

/// `retrieve` stdout: the merged evidence for one question.
#[derive(Debug, Clone, Serialize)]
pub struct RetrieveRecord {
    pub question: String,
    pub decomposed: bool,
    pub sub_queries: Vec<SubQueryRecord>,
    pub k: usize,
    pub evidence: Vec<EvidenceRecord>,
}

/// `answer` stdout: retrieval plus the generated answer.
#[derive(Debug, Clone, Serialize)]
pub struct AnswerRecord {
    pub question: String,
    pub answer: String,
    pub decomposed: bool,
    pub sub_queries: Vec<SubQueryRecord>,
    pub evidence: Vec<EvidenceRecord>,
}

/// One line of `eval`'s trace file.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub question: String,
    pub prediction: String,
    pub em: bool,
    pub f1: f64,
    pub recall_at: BTreeMap<usize, f64>,
    pub gold_answers: Vec<String>,
    pub gold_passage_ids: Vec<String>,
    pub retrieved_passage_ids: Vec<String>,
    pub dense_fallbacks: usize,
}

/// Top-level shape of `eval`'s report file.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRecord {
    pub n_examples: usize,
    pub em: f64,
    pub f1: f64,
    pub recall_at: BTreeMap<usize, f64>,
    pub n_with_gold_passages: usize,
    pub recall_mode: gistrag_core::eval::RecallMode,
    pub epsilon: f64,
    pub gamma: f64,
}

/// One scored fact in an explain trace.
#[derive(Debug, Clone, Serialize)]
pub struct FactScoreRecord {
    pub fact_id: String,
    pub fact_string: String,
    pub similarity: f64,
}

/// One seeded entity in an explain trace.
#[derive(Debug, Clone, Serialize)]
pub struct SeedRecord {
    pub entity: String,
    pub weight: f64,
}

/// Per-sub-query deep dive for `explain`.
#[derive(Debug, Clone, Serialize)]
pub struct ExplainSubQueryRecord {
    pub sub_query: String,
    pub dense_fallback: bool,
    pub top_facts: Vec<FactScoreRecord>,
    pub seeds: Vec<SeedRecord>,
    pub walk_converged: bool,
    pub walk_iterations: usize,
    pub candidates: usize,
    pub ranking: Vec<EvidenceRecord>,
}

/// `explain` stdout: everything that led to the final evidence.
#[derive(Debug, Clone, Serialize)]
pub struct ExplainRecord {
    pub question: String,
    pub decomposed: bool,
    pub sub_queries: Vec<ExplainSubQueryRecord>,
    pub merged: Vec<EvidenceRecord>,
}

/// One sweep cell's outcome.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCellRecord {
    pub epsilon: f64,
    pub gamma: f64,
    pub em: f64,
    pub f1: f64,
    pub recall_at: BTreeMap<usize, f64>,
}

/// `sweep` output file: the whole grid.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub cells: Vec<SweepCellRecord>,
}
