//! LLM-backed distillation of passages into memories, entities, and triples,
//! plus query decomposition and answer generation.
//!
//! All five operations run against the [`ChatProvider`] boundary. Production
//! uses the HTTP provider; every test (and mock-mode pipeline run) uses the
//! deterministic rule-based provider in [`mock`]. Provider output is never
//! trusted: each parse failure gets exactly one retry, then the documented
//! fail-safe kicks in — empty entity/triple lists with a logged warning, a
//! no-split decomposition, or a surfaced error for memories and answers,
//! which have no safe degraded form.

pub mod http;
pub mod mock;
pub mod prompts;

use serde::{Deserialize, Serialize};

use crate::corpus::Passage;
use crate::rerank::EvidencePair;
use crate::{Error, Result};

pub use http::HttpProvider;
pub use mock::MockProvider;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Chat-completion boundary: one system prompt, one user message, one reply.
///
/// Implementations must be `Send + Sync`; indexing fans calls out across a
/// bounded worker pool.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, system: &str, user: &str) -> Result<String>;

    /// Short label for logs.
    fn name(&self) -> &'static str;
}

/// The distilled, self-contained restatement of one passage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub memory_id: String,
    pub passage_id: String,
    /// The provider's brief strategy notes (kept for auditability).
    pub think_text: String,
    /// The memory body used for entity/triple extraction and evidence.
    pub memory_text: String,
}

/// A named entity as extracted, with its canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    /// Surface form as returned by the provider.
    pub surface: String,
    /// Case-folded, whitespace-collapsed form; the graph key.
    pub canonical: String,
}

/// A relation triple anchored to the memory it was extracted from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub memory_id: String,
}

/// Outcome of query decomposition.
///
/// Invariants (enforced here, whatever the provider returns): `split ==
/// false` implies no sub-questions; `split == true` implies between 2 and
/// `max_splits` of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub split: bool,
    pub sub_questions: Vec<String>,
}

impl DecompositionResult {
    pub fn no_split() -> Self {
        DecompositionResult {
            split: false,
            sub_questions: Vec::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Canonicalization
// ---------------------------------------------------------------------------

/// Canonical entity form: Unicode-lowercased, trimmed, inner whitespace
/// collapsed to single spaces. Idempotent.
pub fn canonicalize_entity(surface: &str) -> String {
    surface
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Distills `passage` into a [`MemoryRecord`] via the memory-writing prompt.
///
/// The reply must carry non-empty `<think>` and `<memory>` regions; one
/// malformed reply earns one retry, after which the error surfaces with the
/// raw response attached.
pub fn extract_memory(provider: &dyn ChatProvider, passage: &Passage) -> Result<MemoryRecord> {
    if passage.text.trim().is_empty() {
        return Err(Error::InvalidInput(format!(
            "passage `{}` is empty",
            passage.passage_id
        )));
    }
    let attempt = || -> Result<(String, String)> {
        let raw = provider.complete(prompts::MEMORY, &passage.text)?;
        parse_memory_reply(&raw)
    };
    let (think_text, memory_text) = retry_once(attempt)?;
    Ok(MemoryRecord {
        memory_id: format!("m-{}", passage.passage_id),
        passage_id: passage.passage_id.clone(),
        think_text,
        memory_text,
    })
}

/// Extracts named entities from a memory. Unusable provider output (after
/// the retry) degrades to an empty list with a logged warning — a passage
/// without entities still indexes, it just cannot anchor diffusion.
pub fn extract_entities(
    provider: &dyn ChatProvider,
    memory: &MemoryRecord,
) -> Result<Vec<EntityMention>> {
    let attempt = || -> Result<Vec<String>> {
        let raw = provider.complete(prompts::NER, &memory.memory_text)?;
        parse_string_list(&raw)
    };
    let surfaces = match retry_once(attempt) {
        Ok(s) => s,
        Err(e) => {
            log::warn!(
                "entity extraction for {} failed after retry ({e}); continuing with none",
                memory.memory_id
            );
            return Ok(Vec::new());
        }
    };

    let mut seen = std::collections::BTreeSet::new();
    let mut mentions = Vec::new();
    for surface in surfaces {
        let canonical = canonicalize_entity(&surface);
        if canonical.is_empty() || !seen.insert(canonical.clone()) {
            continue;
        }
        mentions.push(EntityMention {
            surface: surface.trim().to_string(),
            canonical,
        });
    }
    Ok(mentions)
}

/// Extracts relation triples from a memory, given the entity list the
/// triple prompt asks for. Endpoints are canonicalized; exact duplicates
/// within the memory collapse. Triples whose endpoints never showed up in
/// the entity list are kept — the graph builder unions endpoints into the
/// entity set. Same fail-safe as entity extraction.
pub fn extract_triples(
    provider: &dyn ChatProvider,
    memory: &MemoryRecord,
    entities: &[EntityMention],
) -> Result<Vec<Triple>> {
    let entity_list: Vec<&str> = entities.iter().map(|e| e.surface.as_str()).collect();
    let user = format!(
        "Passage:\n{}\n\nNamed entities: {}",
        memory.memory_text,
        serde_json::to_string(&entity_list).expect("string list serializes"),
    );
    let attempt = || -> Result<Vec<(String, String, String)>> {
        let raw = provider.complete(prompts::TRIPLE, &user)?;
        parse_triple_list(&raw)
    };
    let raw_triples = match retry_once(attempt) {
        Ok(t) => t,
        Err(e) => {
            log::warn!(
                "triple extraction for {} failed after retry ({e}); continuing with none",
                memory.memory_id
            );
            return Ok(Vec::new());
        }
    };

    let mut seen = std::collections::BTreeSet::new();
    let mut triples = Vec::new();
    for (h, r, t) in raw_triples {
        let head = canonicalize_entity(&h);
        let tail = canonicalize_entity(&t);
        let relation = r.split_whitespace().collect::<Vec<_>>().join(" ");
        if head.is_empty() || relation.is_empty() || tail.is_empty() {
            continue;
        }
        if !seen.insert((head.clone(), relation.clone(), tail.clone())) {
            continue;
        }
        triples.push(Triple {
            head,
            relation,
            tail,
            memory_id: memory.memory_id.clone(),
        });
    }
    Ok(triples)
}

/// Decides whether `question` should split into parallel sub-questions
/// (at most `max_splits`). Provider misbehavior — transport failure, invalid
/// JSON, impossible counts — degrades to "no split" after the retry, so the
/// result always satisfies the [`DecompositionResult`] invariants.
pub fn decompose_query(
    provider: &dyn ChatProvider,
    question: &str,
    max_splits: usize,
) -> Result<DecompositionResult> {
    if max_splits < 2 {
        return Err(Error::InvalidInput(format!(
            "max_splits={max_splits}; splitting needs at least 2"
        )));
    }
    let system = prompts::QUERY_DECOMPOSITION.replace("{max_splits}", &max_splits.to_string());

    #[derive(Deserialize)]
    struct Reply {
        split: bool,
        #[serde(default)]
        sub_questions: Vec<String>,
    }

    let attempt = || -> Result<Reply> {
        let raw = provider.complete(&system, question)?;
        serde_json::from_str(raw.trim())
            .map_err(|e| Error::provider(format!("decomposition reply is not valid JSON: {e}"), Some(raw)))
    };
    let reply = match retry_once(attempt) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("query decomposition failed after retry ({e}); treating as no split");
            return Ok(DecompositionResult::no_split());
        }
    };

    if !reply.split {
        return Ok(DecompositionResult::no_split());
    }
    let mut subs: Vec<String> = reply
        .sub_questions
        .into_iter()
        .map(|q| q.trim().to_string())
        .filter(|q| !q.is_empty())
        .collect();
    subs.truncate(max_splits);
    if subs.len() < 2 {
        // A "split" into fewer than two parts is not a split.
        return Ok(DecompositionResult::no_split());
    }
    Ok(DecompositionResult {
        split: true,
        sub_questions: subs,
    })
}

/// Generates an answer from ranked evidence pairs (passage, then its
/// memory, in rank order). Empty evidence is allowed — the provider sees
/// only the question. Provider failure after the retry surfaces as an error;
/// there is no safe fabricated answer.
pub fn generate_answer(
    provider: &dyn ChatProvider,
    question: &str,
    evidence: &[EvidencePair],
) -> Result<String> {
    let mut user = String::new();
    for (i, pair) in evidence.iter().enumerate() {
        let n = i + 1;
        user.push_str(&format!("Passage {n}: {}\n", pair.passage_text));
        user.push_str(&format!("Memory {n}: {}\n\n", pair.memory_text));
    }
    user.push_str(&format!("Question: {question}\nAnswer:"));

    let answer = retry_once(|| provider.complete(prompts::ANSWER, &user))?;
    Ok(answer.trim().to_string())
}

// ---------------------------------------------------------------------------
// Reply parsing
// ---------------------------------------------------------------------------

fn retry_once<T>(mut attempt: impl FnMut() -> Result<T>) -> Result<T> {
    attempt().or_else(|first| {
        attempt().map_err(|second| {
            log::debug!("first attempt failed ({first}); retry also failed");
            second
        })
    })
}

fn parse_memory_reply(raw: &str) -> Result<(String, String)> {
    let think = tagged_region(raw, "think");
    let memory = tagged_region(raw, "memory");
    match (think, memory) {
        (Some(t), Some(m)) if !m.trim().is_empty() => {
            Ok((t.trim().to_string(), m.trim().to_string()))
        }
        (_, Some(_)) | (_, None) => Err(Error::provider(
            "memory reply is missing a non-empty <think>/<memory> region",
            Some(raw.to_string()),
        )),
    }
}

fn tagged_region(raw: &str, tag: &str) -> Option<String> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = raw.find(&open)? + open.len();
    let end = raw[start..].find(&close)? + start;
    Some(raw[start..end].to_string())
}

/// Parses a JSON list of strings, tolerating objects with a `name` field.
fn parse_string_list(raw: &str) -> Result<Vec<String>> {
    let value: serde_json::Value = serde_json::from_str(raw.trim())
        .map_err(|e| Error::provider(format!("entity reply is not valid JSON: {e}"), Some(raw.into())))?;
    let items = value
        .as_array()
        .ok_or_else(|| Error::provider("entity reply is not a JSON list", Some(raw.into())))?;
    let mut out = Vec::new();
    for item in items {
        match item {
            serde_json::Value::String(s) => out.push(s.clone()),
            serde_json::Value::Object(map) => {
                if let Some(serde_json::Value::String(s)) = map.get("name") {
                    out.push(s.clone());
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Parses a JSON list of triples: `[h, r, t]` arrays, or objects keyed
/// `head`/`relation`/`tail` (`subject`/`predicate`/`object` also accepted).
fn parse_triple_list(raw: &str) -> Result<Vec<(String, String, String)>> {
    let value: serde_json::Value = serde_json::from_str(raw.trim())
        .map_err(|e| Error::provider(format!("triple reply is not valid JSON: {e}"), Some(raw.into())))?;
    let items = value
        .as_array()
        .ok_or_else(|| Error::provider("triple reply is not a JSON list", Some(raw.into())))?;
    let mut out = Vec::new();
    for item in items {
        match item {
            serde_json::Value::Array(parts) if parts.len() >= 3 => {
                let fields: Vec<&str> = parts.iter().take(3).filter_map(|p| p.as_str()).collect();
                if fields.len() == 3 {
                    out.push((fields[0].into(), fields[1].into(), fields[2].into()));
                }
            }
            serde_json::Value::Object(map) => {
                let get = |a: &str, b: &str| {
                    map.get(a)
                        .or_else(|| map.get(b))
                        .and_then(|v| v.as_str())
                        .map(str::to_string)
                };
                if let (Some(h), Some(r), Some(t)) = (
                    get("head", "subject"),
                    get("relation", "predicate"),
                    get("tail", "object"),
                ) {
                    out.push((h, r, t));
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Provider that replays a fixed reply and counts invocations.
    struct Scripted {
        reply: String,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn new(reply: &str) -> Self {
            Scripted {
                reply: reply.into(),
                calls: AtomicUsize::new(0),
            }
        }
        fn calls(&self) -> usize {
            self.calls.load(Ordering::SeqCst)
        }
    }

    impl ChatProvider for Scripted {
        fn complete(&self, _system: &str, _user: &str) -> Result<String> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(self.reply.clone())
        }
        fn name(&self) -> &'static str {
            "scripted"
        }
    }

    fn passage(text: &str) -> Passage {
        Passage {
            passage_id: "d#0000".into(),
            doc_id: "d".into(),
            ordinal: 0,
            text: text.into(),
        }
    }

    fn memory(text: &str) -> MemoryRecord {
        MemoryRecord {
            memory_id: "m-d#0000".into(),
            passage_id: "d#0000".into(),
            think_text: String::new(),
            memory_text: text.into(),
        }
    }

    #[test]
    fn canonicalize_folds_case_and_whitespace() {
        assert_eq!(canonicalize_entity("  Nicki   MINAJ "), "nicki minaj");
        assert_eq!(canonicalize_entity("Arrête Ton Cinéma"), "arrête ton cinéma");
    }

    #[test]
    fn canonicalize_is_idempotent_on_fixtures() {
        for s in ["Port of Spain", "  ÅNGSTRÖM  unit ", "already canonical"] {
            let once = canonicalize_entity(s);
            assert_eq!(canonicalize_entity(&once), once);
        }
    }

    #[test]
    fn memory_reply_parses_both_regions() {
        let p = Scripted::new("<think>strategy</think>\n<memory>Ada wrote programs.</memory>");
        let m = extract_memory(&p, &passage("Ada wrote programs.")).unwrap();
        assert_eq!(m.think_text, "strategy");
        assert_eq!(m.memory_text, "Ada wrote programs.");
        assert_eq!(m.memory_id, "m-d#0000");
        assert_eq!(m.passage_id, "d#0000");
    }

    #[test]
    fn malformed_memory_reply_retries_once_then_errors_with_raw() {
        let p = Scripted::new("<think>only thinking, no memory tag</think>");
        let err = extract_memory(&p, &passage("text")).unwrap_err();
        assert_eq!(p.calls(), 2);
        match err {
            Error::Provider { raw, .. } => {
                assert!(raw.unwrap().contains("only thinking"));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn empty_memory_region_is_malformed() {
        let p = Scripted::new("<think>t</think><memory>   </memory>");
        assert!(extract_memory(&p, &passage("text")).is_err());
        assert_eq!(p.calls(), 2);
    }

    #[test]
    fn entities_dedupe_by_canonical_form_keeping_first_surface() {
        let p = Scripted::new(r#"["Paris", "PARIS", "paris ", "Seine"]"#);
        let got = extract_entities(&p, &memory("irrelevant")).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].surface, "Paris");
        assert_eq!(got[0].canonical, "paris");
        assert_eq!(got[1].canonical, "seine");
    }

    #[test]
    fn unparseable_entities_degrade_to_empty_after_retry() {
        let p = Scripted::new("not json at all");
        let got = extract_entities(&p, &memory("text")).unwrap();
        assert!(got.is_empty());
        assert_eq!(p.calls(), 2);
    }

    #[test]
    fn triples_canonicalize_endpoints_and_dedupe() {
        let p = Scripted::new(
            r#"[["Nicki Minaj", "place of birth", "Port Of Spain"],
                ["nicki minaj", "place of birth", "port of spain"],
                {"head": "Port of Spain", "relation": "capital of", "tail": "Trinidad"}]"#,
        );
        let got = extract_triples(&p, &memory("text"), &[]).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].head, "nicki minaj");
        assert_eq!(got[0].tail, "port of spain");
        assert_eq!(got[0].memory_id, "m-d#0000");
        assert_eq!(got[1].relation, "capital of");
    }

    #[test]
    fn unparseable_triples_degrade_to_empty_after_retry() {
        let p = Scripted::new(r#"{"oops": true}"#);
        let got = extract_triples(&p, &memory("text"), &[]).unwrap();
        assert!(got.is_empty());
        assert_eq!(p.calls(), 2);
    }

    #[test]
    fn decomposition_invalid_json_fails_safe_to_no_split() {
        let p = Scripted::new("i refuse to answer in JSON");
        let got = decompose_query(&p, "Which is older, A or B?", 2).unwrap();
        assert_eq!(got, DecompositionResult::no_split());
        assert_eq!(p.calls(), 2);
    }

    #[test]
    fn decomposition_clamps_overlong_splits() {
        let p = Scripted::new(r#"{"split": true, "sub_questions": ["a?", "b?", "c?", "d?"]}"#);
        let got = decompose_query(&p, "q", 3).unwrap();
        assert!(got.split);
        assert_eq!(got.sub_questions.len(), 3);
    }

    #[test]
    fn decomposition_single_subquestion_collapses_to_no_split() {
        let p = Scripted::new(r#"{"split": true, "sub_questions": ["only one?"]}"#);
        let got = decompose_query(&p, "q", 2).unwrap();
        assert_eq!(got, DecompositionResult::no_split());
    }

    #[test]
    fn decomposition_rejects_max_splits_below_two() {
        let p = Scripted::new("{}");
        assert!(matches!(
            decompose_query(&p, "q", 1),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn answer_generation_surfaces_provider_failure() {
        struct Failing(AtomicUsize);
        impl ChatProvider for Failing {
            fn complete(&self, _s: &str, _u: &str) -> Result<String> {
                self.0.fetch_add(1, Ordering::SeqCst);
                Err(Error::provider("boom", None))
            }
            fn name(&self) -> &'static str {
                "failing"
            }
        }
        let p = Failing(AtomicUsize::new(0));
        assert!(generate_answer(&p, "q", &[]).is_err());
        assert_eq!(p.0.load(Ordering::SeqCst), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn canonicalize_is_idempotent(s in "\\PC{0,40}") {
                let once = canonicalize_entity(&s);
                prop_assert_eq!(canonicalize_entity(&once), once.clone());
                prop_assert!(!once.starts_with(' ') && !once.ends_with(' '));
                prop_assert!(!once.contains("  "));
            }

            /// Whatever garbage the provider replies with, the decomposition
            /// invariants hold.
            #[test]
            fn decomposition_invariants_survive_arbitrary_replies(reply in "\\PC{0,80}") {
                let p = Scripted::new(&reply);
                let got = decompose_query(&p, "anything?", 2).unwrap();
                if got.split {
                    prop_assert!(got.sub_questions.len() == 2);
                } else {
                    prop_assert!(got.sub_questions.is_empty());
                }
            }
        }
    }
}
