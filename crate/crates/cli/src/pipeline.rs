//! Pipeline orchestration: indexing, retrieval, answering, evaluation.
//!
//! The core crate owns all algorithmic decisions; this module wires stages
//! together, owns the on-disk store layout, and keeps machine-readable
//! output deterministic (timings and progress go to the log, never into
//! results).

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use gistrag_core::corpus::{load_corpus, segment, CorpusFormat, Passage};
use gistrag_core::diffusion::{
    diffuse, fact_similarities, initial_activation, passage_diffusion_scores, top_k_facts,
};
use gistrag_core::embed::{EmbeddingKind, HashEmbedder, HttpEmbedder, TextEmbedder};
use gistrag_core::eval::{
    answer_containment_golds, evaluate, recall_at_k, EvalCase, QAExample, RecallMode,
};
use gistrag_core::extract::{
    decompose_query, extract_entities, extract_memory, extract_triples, generate_answer,
    ChatProvider, EntityMention, HttpProvider, MemoryRecord, MockProvider, Triple,
};
use gistrag_core::graph::{
    build_diffusion_graph, build_graph, graph_stats, load_graph, save_graph, GraphStats,
    KnowledgeGraph,
};
use gistrag_core::rerank::{
    assemble_evidence, candidate_set, merge_rankings, rank_candidates, EvidencePair,
};
use gistrag_core::{DiffusionGraph64, DiffusionParams64, RankedPassage64, VectorIndex64};

use crate::config::{Config, EmbedderMode, ProviderMode};
use crate::records::{
    EvidenceRecord, ExplainRecord, ExplainSubQueryRecord, FactScoreRecord, ReportRecord,
    RetrieveRecord, SeedRecord, SubQueryRecord, SweepCellRecord, SweepRecord, TraceRecord,
};

// ---------------------------------------------------------------------------
// Store layout
// ---------------------------------------------------------------------------

/// Artifact kinds that get their own embedding index file.
const INDEX_KINDS: [(&str, EmbeddingKind); 5] = [
    ("entity", EmbeddingKind::Entity),
    ("relation", EmbeddingKind::Relation),
    ("fact", EmbeddingKind::Fact),
    ("memory", EmbeddingKind::Memory),
    ("passage", EmbeddingKind::Passage),
];

/// Paths inside a store directory.
pub struct StorePaths {
    dir: PathBuf,
}

impl StorePaths {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }

    pub fn graph(&self) -> PathBuf {
        self.dir.join("graph.json")
    }

    pub fn index(&self, kind: &str) -> PathBuf {
        self.dir.join(format!("index-{kind}.jsonl"))
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.dir.join("checkpoint.jsonl")
    }
}

// ---------------------------------------------------------------------------
// Factories
// ---------------------------------------------------------------------------

/// Builds the chat provider the config asks for; `mock` forces the offline
/// provider regardless of config.
pub fn make_provider(config: &Config, mock: bool) -> Result<Box<dyn ChatProvider>> {
    if mock || config.provider.mode == ProviderMode::Mock {
        return Ok(Box::new(MockProvider));
    }
    let p = &config.provider;
    Ok(Box::new(HttpProvider::new(
        p.endpoint.clone(),
        p.model.clone(),
        &p.api_key_env,
        p.timeout_secs,
    )?))
}

/// Builds the embedder the config asks for; `mock` forces the hash embedder.
pub fn make_embedder(config: &Config, mock: bool) -> Result<Box<dyn TextEmbedder<f64>>> {
    if mock || config.embedder.mode == EmbedderMode::Hash {
        return Ok(Box::new(HashEmbedder::<f64>::new(
            config.embedder.dimension,
            config.embedder.bigrams,
        )?));
    }
    let e = &config.embedder;
    Ok(Box::new(HttpEmbedder::new(
        e.endpoint.clone(),
        e.model.clone(),
        &e.api_key_env,
        e.dimension,
        e.timeout_secs,
    )?))
}

// ---------------------------------------------------------------------------
// Indexing
// ---------------------------------------------------------------------------

/// One passage's extraction output as checkpointed on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExtractionRecord {
    passage_id: String,
    memory: MemoryRecord,
    entities: Vec<EntityMention>,
    triples: Vec<Triple>,
}

/// How many passages are extracted per parallel batch (and per checkpoint
/// flush).
const EXTRACTION_BATCH: usize = 32;

fn read_checkpoint(path: &Path) -> Result<BTreeMap<String, ExtractionRecord>> {
    let mut records = BTreeMap::new();
    if !path.exists() {
        return Ok(records);
    }
    let reader = BufReader::new(File::open(path)?);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ExtractionRecord = serde_json::from_str(&line).with_context(|| {
            format!("corrupt checkpoint `{}` line {}", path.display(), i + 1)
        })?;
        records.insert(record.passage_id.clone(), record);
    }
    Ok(records)
}

/// Indexes the corpus into `store_dir`: segment, extract (resumable),
/// build the graph, embed every artifact kind, persist.
pub fn run_index(
    config: &Config,
    provider: &dyn ChatProvider,
    embedder: &dyn TextEmbedder<f64>,
    force: bool,
) -> Result<GraphStats> {
    let started = Instant::now();
    let store = StorePaths::new(&config.store_dir);
    std::fs::create_dir_all(&config.store_dir)?;
    if force {
        for path in [store.graph(), store.checkpoint()]
            .into_iter()
            .chain(INDEX_KINDS.iter().map(|(k, _)| store.index(k)))
        {
            if path.exists() {
                std::fs::remove_file(&path)?;
            }
        }
    }

    let documents = load_corpus(&config.corpus, CorpusFormat::Jsonl)?;
    if documents.is_empty() {
        bail!("corpus `{}` has no documents", config.corpus.display());
    }
    let mut passages = Vec::new();
    for doc in &documents {
        passages.extend(segment(doc, config.max_tokens)?);
    }
    log::info!(
        "segmented {} documents into {} passages in {:.2?}",
        documents.len(),
        passages.len(),
        started.elapsed()
    );

    // Resume from the checkpoint: anything already extracted is skipped.
    // A checkpoint that references unknown passages belongs to a different
    // corpus revision and refuses to mix.
    let mut done = read_checkpoint(&store.checkpoint())?;
    let passage_ids: std::collections::BTreeSet<&str> =
        passages.iter().map(|p| p.passage_id.as_str()).collect();
    if let Some(stale) = done.keys().find(|id| !passage_ids.contains(id.as_str())) {
        bail!(
            "checkpoint `{}` references passage `{stale}` that the current corpus \
             does not produce; re-run with --force to discard it",
            store.checkpoint().display()
        );
    }
    let pending: Vec<&Passage> = passages
        .iter()
        .filter(|p| !done.contains_key(&p.passage_id))
        .collect();
    if !done.is_empty() {
        log::info!(
            "checkpoint covers {} passages; {} left to extract",
            done.len(),
            pending.len()
        );
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.provider.concurrency)
        .build()
        .context("cannot build extraction thread pool")?;
    let extraction_started = Instant::now();
    let mut checkpoint_file = BufWriter::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(store.checkpoint())?,
    );
    for batch in pending.chunks(EXTRACTION_BATCH) {
        let extracted: Vec<gistrag_core::Result<ExtractionRecord>> = pool.install(|| {
            batch
                .par_iter()
                .map(|passage| {
                    let memory = extract_memory(provider, passage)?;
                    let entities = extract_entities(provider, &memory)?;
                    let triples = extract_triples(provider, &memory, &entities)?;
                    Ok(ExtractionRecord {
                        passage_id: passage.passage_id.clone(),
                        memory,
                        entities,
                        triples,
                    })
                })
                .collect()
        });
        // Records land in the checkpoint in passage order, whatever order
        // the threads finished in.
        for result in extracted {
            let record = result?;
            serde_json::to_writer(&mut checkpoint_file, &record)?;
            checkpoint_file.write_all(b"\n")?;
            done.insert(record.passage_id.clone(), record);
        }
        checkpoint_file.flush()?;
    }
    log::info!(
        "extraction finished in {:.2?} ({} passages total)",
        extraction_started.elapsed(),
        done.len()
    );

    // Assemble the graph from records in passage order.
    let mut memories = Vec::with_capacity(passages.len());
    let mut mentions = Vec::with_capacity(passages.len());
    let mut triples = Vec::new();
    for passage in &passages {
        let record = &done[&passage.passage_id];
        memories.push(record.memory.clone());
        mentions.push((record.memory.memory_id.clone(), record.entities.clone()));
        triples.extend(record.triples.iter().cloned());
    }
    let kg = build_graph(&passages, &memories, &mentions, &triples)?;
    let stats = graph_stats(&kg);
    log::info!(
        "graph: {} entities, {} facts, {} passages, {} edges",
        stats.entities,
        stats.facts,
        stats.passages,
        stats.edges
    );

    // Embed every artifact family into its own index.
    let embedding_started = Instant::now();
    for (name, kind) in INDEX_KINDS {
        let entries: Vec<(String, String)> = match kind {
            EmbeddingKind::Entity => kg
                .entities()
                .map(|e| (e.to_string(), e.to_string()))
                .collect(),
            EmbeddingKind::Relation => kg
                .relations()
                .map(|r| (r.to_string(), r.to_string()))
                .collect(),
            EmbeddingKind::Fact => kg
                .facts()
                .map(|f| (f.fact_id.clone(), f.fact_string.clone()))
                .collect(),
            EmbeddingKind::Memory => kg
                .memories()
                .map(|m| (m.memory_id.clone(), m.memory_text.clone()))
                .collect(),
            EmbeddingKind::Passage => kg
                .passages()
                .map(|p| (p.passage_id.clone(), p.text.clone()))
                .collect(),
            EmbeddingKind::Query => unreachable!("queries are embedded at retrieve time"),
        };
        let index = embed_entries(embedder, kind, &entries)
            .with_context(|| format!("embedding {name} texts"))?;
        index.save(&store.index(name))?;
        log::info!("embedded {} {name} texts", entries.len());
    }
    log::info!("embedding finished in {:.2?}", embedding_started.elapsed());

    save_graph(&kg, &store.graph())?;
    log::info!("index complete in {:.2?}", started.elapsed());
    Ok(stats)
}

/// Batch size for embedding requests.
const EMBED_BATCH: usize = 64;

fn embed_entries(
    embedder: &dyn TextEmbedder<f64>,
    kind: EmbeddingKind,
    entries: &[(String, String)],
) -> Result<VectorIndex64> {
    let mut index = VectorIndex64::new(embedder.dimension())?;
    for chunk in entries.chunks(EMBED_BATCH) {
        let texts: Vec<&str> = chunk.iter().map(|(_, text)| text.as_str()).collect();
        let vectors = embedder.embed_batch(kind, &texts)?;
        for ((id, _), vector) in chunk.iter().zip(vectors) {
            index.insert(id.clone(), vector)?;
        }
    }
    Ok(index)
}

// ---------------------------------------------------------------------------
// Retrieval
// ---------------------------------------------------------------------------

/// Knobs the sweep varies without rebuilding anything.
#[derive(Debug, Clone, Copy)]
pub struct Knobs {
    pub epsilon: f64,
    pub gamma: f64,
}

/// Per-sub-query retrieval outcome, detailed enough for `explain`.
pub struct SubQueryOutcome {
    pub sub_query: String,
    pub dense_fallback: bool,
    pub converged: bool,
    pub iterations: usize,
    /// `(fact_id, similarity)` of the seed facts, best first.
    pub top_facts: Vec<(String, f64)>,
    /// `(entity, seed weight)` of anchored entities, heaviest first.
    pub seeds: Vec<(String, f64)>,
    pub candidates: usize,
    /// Full-depth fused ranking over the candidate set.
    pub ranking: Vec<RankedPassage64>,
}

/// Retrieval outcome for one question.
pub struct RetrievalOutcome {
    pub decomposed: bool,
    pub sub_results: Vec<SubQueryOutcome>,
    pub merged: Vec<RankedPassage64>,
    pub evidence: Vec<EvidencePair>,
}

/// Loaded store plus the components needed to serve queries.
pub struct Retriever {
    config: Config,
    provider: Box<dyn ChatProvider>,
    embedder: Box<dyn TextEmbedder<f64>>,
    kg: KnowledgeGraph,
    dg: DiffusionGraph64,
    fact_index: VectorIndex64,
    passage_index: VectorIndex64,
}

impl Retriever {
    /// Loads the store built by `index`. Missing artifacts produce an error
    /// that says what to run, not just what file was absent.
    pub fn load(
        config: &Config,
        provider: Box<dyn ChatProvider>,
        embedder: Box<dyn TextEmbedder<f64>>,
    ) -> Result<Self> {
        let store = StorePaths::new(&config.store_dir);
        for path in [store.graph(), store.index("fact"), store.index("passage")] {
            if !path.exists() {
                bail!(
                    "store `{}` is missing `{}`; run `gistrag index` first",
                    config.store_dir.display(),
                    path.file_name().unwrap_or_default().to_string_lossy()
                );
            }
        }
        let kg = load_graph(&store.graph())?;
        let dg = build_diffusion_graph(&kg)?;
        let fact_index = VectorIndex64::load(&store.index("fact"))?;
        let passage_index = VectorIndex64::load(&store.index("passage"))?;
        if embedder.dimension() != passage_index.dim() {
            bail!(
                "embedder dimension {} does not match the stored index dimension {}; \
                 re-run `gistrag index` after changing embedder settings",
                embedder.dimension(),
                passage_index.dim()
            );
        }
        Ok(Self {
            config: config.clone(),
            provider,
            embedder,
            kg,
            dg,
            fact_index,
            passage_index,
        })
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.kg
    }

    fn config_knobs(&self) -> Knobs {
        Knobs {
            epsilon: self.config.rerank.epsilon,
            gamma: self.config.diffusion.gamma,
        }
    }

    fn params_with(&self, knobs: &Knobs) -> DiffusionParams64 {
        DiffusionParams64 {
            gamma: knobs.gamma,
            ..self.config.diffusion.to_params()
        }
    }

    /// Retrieves evidence for `question`, merging sub-query rankings into a
    /// top-`k` list.
    pub fn retrieve(&self, question: &str, k: usize) -> Result<RetrievalOutcome> {
        self.retrieve_with(question, k, &self.config_knobs())
    }

    /// Retrieval with explicit epsilon/gamma (the sweep path).
    pub fn retrieve_with(
        &self,
        question: &str,
        k: usize,
        knobs: &Knobs,
    ) -> Result<RetrievalOutcome> {
        let started = Instant::now();
        let decomposition =
            decompose_query(self.provider.as_ref(), question, self.config.retrieval.m_split)?;
        let sub_queries: Vec<String> = if decomposition.split {
            decomposition.sub_questions
        } else {
            vec![question.to_string()]
        };

        let mut sub_results = Vec::with_capacity(sub_queries.len());
        for sub_query in &sub_queries {
            sub_results.push(self.retrieve_sub_query(sub_query, knobs)?);
        }
        let rankings: Vec<Vec<RankedPassage64>> =
            sub_results.iter().map(|r| r.ranking.clone()).collect();
        let merged = merge_rankings(&rankings, k)?;
        let evidence = assemble_evidence(&merged, &self.kg)?;
        log::info!(
            "retrieved {} evidence pairs ({} sub-queries) in {:.2?}",
            evidence.len(),
            sub_results.len(),
            started.elapsed()
        );
        Ok(RetrievalOutcome {
            decomposed: sub_results.len() > 1,
            sub_results,
            merged,
            evidence,
        })
    }

    fn retrieve_sub_query(&self, sub_query: &str, knobs: &Knobs) -> Result<SubQueryOutcome> {
        let params = self.params_with(knobs);
        let query_emb = self.embedder.embed(EmbeddingKind::Query, sub_query)?;

        let similarities = fact_similarities(&query_emb, &self.fact_index)?;
        let top_facts = top_k_facts(&similarities, params.k_facts);

        let seed = initial_activation(&top_facts, &self.kg, &self.dg, &params)?;
        let (diffusion_scores, seeds, converged, iterations, dense_fallback) = match seed {
            Some(seed) => {
                let run = diffuse(&seed, &self.dg, &params)?;
                let scores = passage_diffusion_scores(&run, &self.dg);
                let mut seeded: Vec<(String, f64)> = seed
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(i, &w)| (self.dg.node_id(i).to_string(), w))
                    .collect();
                seeded.sort_by(|a, b| {
                    b.1.partial_cmp(&a.1)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then_with(|| a.0.cmp(&b.0))
                });
                (scores, seeded, run.converged, run.iterations, false)
            }
            None => {
                log::info!("no entity anchors `{sub_query}`; falling back to dense ranking");
                (BTreeMap::new(), Vec::new(), true, 0, true)
            }
        };

        let (raw_diff, raw_sim) = candidate_set(
            &query_emb,
            &self.passage_index,
            &diffusion_scores,
            self.config.rerank.n_dense,
        )?;
        let candidates = raw_diff
            .keys()
            .chain(raw_sim.keys())
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        let ranking =
            rank_candidates(&raw_diff, &raw_sim, knobs.epsilon, self.config.rerank.delta)?;

        Ok(SubQueryOutcome {
            sub_query: sub_query.to_string(),
            dense_fallback,
            converged,
            iterations,
            top_facts,
            seeds,
            candidates,
            ranking,
        })
    }

    /// Retrieval plus answer generation over the top `k_final` evidence.
    pub fn answer(&self, question: &str) -> Result<(String, RetrievalOutcome)> {
        let outcome = self.retrieve(question, self.config.retrieval.k_final)?;
        let answer = generate_answer(self.provider.as_ref(), question, &outcome.evidence)?;
        Ok((answer, outcome))
    }
}

// ---------------------------------------------------------------------------
// Record assembly
// ---------------------------------------------------------------------------

pub fn evidence_records(
    merged: &[RankedPassage64],
    evidence: &[EvidencePair],
) -> Vec<EvidenceRecord> {
    merged
        .iter()
        .zip(evidence)
        .enumerate()
        .map(|(i, (rp, pair))| EvidenceRecord {
            rank: i + 1,
            passage_id: rp.passage_id.clone(),
            s_diff: rp.s_diff,
            s_sim: rp.s_sim,
            s_fused: rp.s_fused,
            memory_id: pair.memory_id.clone(),
            memory_text: pair.memory_text.clone(),
            passage_text: pair.passage_text.clone(),
        })
        .collect()
}

fn sub_query_records(outcome: &RetrievalOutcome) -> Vec<SubQueryRecord> {
    outcome
        .sub_results
        .iter()
        .map(|s| SubQueryRecord {
            sub_query: s.sub_query.clone(),
            dense_fallback: s.dense_fallback,
            walk_converged: s.converged,
            walk_iterations: s.iterations,
            candidates: s.candidates,
        })
        .collect()
}

pub fn retrieve_record(question: &str, k: usize, outcome: &RetrievalOutcome) -> RetrieveRecord {
    RetrieveRecord {
        question: question.to_string(),
        decomposed: outcome.decomposed,
        sub_queries: sub_query_records(outcome),
        k,
        evidence: evidence_records(&outcome.merged, &outcome.evidence),
    }
}

/// How many top facts and seeds an explain trace carries per sub-query.
const EXPLAIN_DEPTH: usize = 10;

pub fn explain_record(
    question: &str,
    outcome: &RetrievalOutcome,
    kg: &KnowledgeGraph,
) -> Result<ExplainRecord> {
    let mut sub_queries = Vec::with_capacity(outcome.sub_results.len());
    for s in &outcome.sub_results {
        let top_facts = s
            .top_facts
            .iter()
            .take(EXPLAIN_DEPTH)
            .map(|(fact_id, similarity)| FactScoreRecord {
                fact_id: fact_id.clone(),
                fact_string: kg
                    .fact(fact_id)
                    .map(|f| f.fact_string.clone())
                    .unwrap_or_default(),
                similarity: *similarity,
            })
            .collect();
        let seeds = s
            .seeds
            .iter()
            .take(EXPLAIN_DEPTH)
            .map(|(entity, weight)| SeedRecord {
                entity: entity.clone(),
                weight: *weight,
            })
            .collect();
        let top = &s.ranking[..s.ranking.len().min(EXPLAIN_DEPTH)];
        let evidence = assemble_evidence(top, kg)?;
        sub_queries.push(ExplainSubQueryRecord {
            sub_query: s.sub_query.clone(),
            dense_fallback: s.dense_fallback,
            top_facts,
            seeds,
            walk_converged: s.converged,
            walk_iterations: s.iterations,
            candidates: s.candidates,
            ranking: evidence_records(top, &evidence),
        });
    }
    Ok(ExplainRecord {
        question: question.to_string(),
        decomposed: outcome.decomposed,
        sub_queries,
        merged: evidence_records(&outcome.merged, &outcome.evidence),
    })
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Mean of `xs` as a percentage, summed in sorted order so the result is
/// independent of example order.
fn ordered_mean_pct(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    100.0 * xs.iter().sum::<f64>() / n
}

/// Evaluates the pipeline over a question set.
///
/// Recall@K is measured against the merged list **at depth K** — the list a
/// reader would actually get from `retrieve --k K` — so multi-query quota
/// effects are reflected honestly. Answers are generated from the top
/// `k_final` evidence.
pub fn run_eval(
    retriever: &Retriever,
    examples: &[QAExample],
    recall_ks: &[usize],
    mode: RecallMode,
    knobs: &Knobs,
) -> Result<(ReportRecord, Vec<TraceRecord>)> {
    if examples.is_empty() {
        bail!("question set is empty");
    }
    let started = Instant::now();
    let k_final = retriever.config.retrieval.k_final;

    let mut cases = Vec::with_capacity(examples.len());
    let mut recall_values: BTreeMap<usize, Vec<f64>> =
        recall_ks.iter().map(|&k| (k, Vec::new())).collect();
    let mut traces_partial = Vec::with_capacity(examples.len());
    let mut n_with_gold = 0usize;

    for example in examples {
        let outcome = retriever.retrieve_with(&example.question, k_final, knobs)?;
        let prediction =
            generate_answer(retriever.provider.as_ref(), &example.question, &outcome.evidence)?;

        let gold_passage_ids: Vec<String> = match &example.gold_passage_ids {
            Some(ids) if !ids.is_empty() => ids.clone(),
            _ => answer_containment_golds(
                &example.gold_answers,
                retriever.kg.passages().map(|p| (p.passage_id.as_str(), p.text.as_str())),
            ),
        };

        let rankings: Vec<Vec<RankedPassage64>> =
            outcome.sub_results.iter().map(|r| r.ranking.clone()).collect();
        let mut recall_at = BTreeMap::new();
        if !gold_passage_ids.is_empty() {
            n_with_gold += 1;
            for (&k, values) in recall_values.iter_mut() {
                let at_depth = merge_rankings(&rankings, k)?;
                let ids: Vec<String> =
                    at_depth.iter().map(|rp| rp.passage_id.clone()).collect();
                let r = recall_at_k(&ids, &gold_passage_ids, k, mode);
                recall_at.insert(k, r);
                values.push(r);
            }
        }

        traces_partial.push(TraceRecord {
            question: example.question.clone(),
            prediction: prediction.clone(),
            em: false, // filled below from the scored evaluation
            f1: 0.0,
            recall_at,
            gold_answers: example.gold_answers.clone(),
            gold_passage_ids: gold_passage_ids.clone(),
            retrieved_passage_ids: outcome
                .merged
                .iter()
                .map(|rp| rp.passage_id.clone())
                .collect(),
            dense_fallbacks: outcome.sub_results.iter().filter(|s| s.dense_fallback).count(),
        });
        cases.push(EvalCase {
            example: example.clone(),
            prediction,
            retrieved: Vec::new(),      // recall is computed per-depth above
            gold_passage_ids: Vec::new(),
        });
    }

    // Answer metrics come from the shared scorer; retrieval metrics were
    // accumulated per merge depth above.
    let (answer_report, per_example) = evaluate(&cases, &[], mode)?;
    for (trace, scored) in traces_partial.iter_mut().zip(&per_example) {
        trace.em = scored.em;
        trace.f1 = scored.f1;
    }

    let report = ReportRecord {
        n_examples: examples.len(),
        em: answer_report.em,
        f1: answer_report.f1,
        recall_at: recall_values
            .into_iter()
            .map(|(k, xs)| (k, ordered_mean_pct(xs)))
            .collect(),
        n_with_gold_passages: n_with_gold,
        recall_mode: mode,
        epsilon: knobs.epsilon,
        gamma: knobs.gamma,
    };
    log::info!(
        "evaluated {} questions in {:.2?}: EM {:.1}, F1 {:.1}",
        examples.len(),
        started.elapsed(),
        report.em,
        report.f1
    );
    Ok((report, traces_partial))
}

/// Writes the eval report and per-question trace into `out_dir`.
pub fn write_eval_outputs(
    out_dir: &Path,
    report: &ReportRecord,
    traces: &[TraceRecord],
) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out_dir)?;
    let report_path = out_dir.join("report.json");
    let trace_path = out_dir.join("trace.jsonl");
    std::fs::write(&report_path, format!("{}\n", serde_json::to_string_pretty(report)?))?;
    let mut w = BufWriter::new(File::create(&trace_path)?);
    for trace in traces {
        serde_json::to_writer(&mut w, trace)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok((report_path, trace_path))
}

// ---------------------------------------------------------------------------
// Parameter sweep
// ---------------------------------------------------------------------------

/// Runs the epsilon x gamma grid. Every value is validated before the first
/// cell runs, so a bad grid fails fast instead of mid-sweep.
pub fn run_sweep(
    retriever: &Retriever,
    examples: &[QAExample],
    recall_ks: &[usize],
    mode: RecallMode,
    epsilons: &[f64],
    gammas: &[f64],
) -> Result<SweepRecord> {
    if epsilons.is_empty() || gammas.is_empty() {
        bail!("sweep needs at least one epsilon and one gamma");
    }
    for &epsilon in epsilons {
        crate::config::validate_rerank(
            epsilon,
            retriever.config.rerank.delta,
            retriever.config.rerank.n_dense,
        )?;
    }
    for &gamma in gammas {
        DiffusionParams64 {
            gamma,
            ..retriever.config.diffusion.to_params()
        }
        .validate()
        .map_err(|e| anyhow!("sweep gamma {gamma}: {e}"))?;
    }

    let mut cells = Vec::with_capacity(epsilons.len() * gammas.len());
    for &epsilon in epsilons {
        for &gamma in gammas {
            let knobs = Knobs { epsilon, gamma };
            let (report, _) = run_eval(retriever, examples, recall_ks, mode, &knobs)?;
            log::info!(
                "sweep cell epsilon={epsilon} gamma={gamma}: EM {:.1}, F1 {:.1}",
                report.em,
                report.f1
            );
            cells.push(SweepCellRecord {
                epsilon,
                gamma,
                em: report.em,
                f1: report.f1,
                recall_at: report.recall_at,
            });
        }
    }
    Ok(SweepRecord { cells })
}
