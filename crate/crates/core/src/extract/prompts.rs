//! Prompt templates, loaded verbatim from `prompts/` at the repository root.
//!
//! The files are the source of truth; they are compiled in so the binary can
//! run from any working directory. `{max_splits}` in the decomposition
//! template is substituted at call time.

pub const NER: &str = include_str!("../../../../prompts/ner.txt");

pub const TRIPLE: &str = include_str!("../../../../prompts/triple.txt");

pub const MEMORY: &str = include_str!("../../../../prompts/memory.txt");

pub const QUERY_DECOMPOSITION: &str =
    include_str!("../../../../prompts/query_decomposition.txt");

/// Reading-comprehension prompt for answer generation. Evidence is rendered
/// as numbered passage/memory pairs in rank order.
pub const ANSWER: &str = "You are a question answering assistant. Use only the numbered evidence \
below to answer the question. Each passage is followed by the condensed memory written for that \
same passage. Reply with the shortest span that answers the question, and nothing else.";
