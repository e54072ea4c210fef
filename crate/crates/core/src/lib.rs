//! Graph-based passage retrieval over LLM-distilled "gist" memories.
//!
//! The library turns a passage corpus into a multi-dimensional knowledge graph
//! (entities, per-passage memories, textualized facts, provenance links) and
//! answers queries by diffusing activation from query-anchored entities
//! through that graph, then fusing the diffusion signal with dense similarity.
//!
//! Pipeline, end to end:
//!
//! 1. [`corpus`] — load documents and segment them into token-capped passages.
//! 2. [`extract`] — distill each passage into a memory, then pull named
//!    entities and relation triples out of the memory (LLM-backed, with a
//!    deterministic rule-based provider for offline runs).
//! 3. [`embed`] — vector representations for every artifact kind plus an
//!    exact-scan index with tie-stable top-k.
//! 4. [`graph`] — assemble the knowledge graph and its diffusion view (a
//!    column-stochastic random-walk operator over entity and passage nodes).
//! 5. [`diffusion`] — seed activation from query-relevant facts and run the
//!    restart walk to score passages by graph proximity.
//! 6. [`rerank`] — min-max normalize both score channels, fuse them, merge
//!    per-sub-query rankings, and assemble passage+memory evidence pairs.
//! 7. [`eval`] — exact-match / token-F1 / recall@K over line-delimited QA
//!    datasets.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below pin the default precision used by the CLI and the test
//! suite.

pub mod corpus;
pub mod diffusion;
pub mod embed;
mod error;
pub mod eval;
pub mod extract;
pub mod graph;
mod net;
pub mod rerank;
mod scalar;

pub use error::{Error, Result};
pub use net::http_requests_attempted;
pub use scalar::Scalar;

/// Default-precision embedding vector.
pub type Embedding64 = embed::Embedding<f64>;
/// Default-precision exact-scan vector index.
pub type VectorIndex64 = embed::VectorIndex<f64>;
/// Default-precision random-walk view of the knowledge graph.
pub type DiffusionGraph64 = graph::DiffusionGraph<f64>;
/// Default-precision diffusion parameter block.
pub type DiffusionParams64 = diffusion::DiffusionParams<f64>;
/// Default-precision scored passage entry produced by the reranker.
pub type RankedPassage64 = rerank::RankedPassage<f64>;
