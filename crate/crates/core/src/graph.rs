//! The knowledge graph and its random-walk view.
//!
//! The graph ties five artifact families together: canonical entities,
//! per-passage memories, relation labels, textualized facts, and the source
//! passages. Every fact is anchored to the memory it came from, and every
//! memory pairs with exactly one passage — so any retrieved node can be
//! traced back to verbatim source text.
//!
//! [`DiffusionGraph`] is the numeric view used by the restart walk: entity
//! and passage nodes, undirected edges (entity–entity per fact, entity–
//! passage per provenance link, multi-edges collapsed into weights), with
//! each column pre-normalized to a probability distribution over neighbors.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Passage;
use crate::extract::{EntityMention, MemoryRecord, Triple};
use crate::scalar::Scalar;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Knowledge graph
// ---------------------------------------------------------------------------

/// A triple lifted into the graph, carrying its provenance and the flat
/// string used for embedding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub fact_id: String,
    pub head: String,
    pub relation: String,
    pub tail: String,
    /// `"head relation tail"`, single-spaced; what gets embedded.
    pub fact_string: String,
    pub memory_id: String,
}

/// The assembled multi-dimensional knowledge graph. All maps are ordered so
/// iteration (and serialization) is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    entities: BTreeSet<String>,
    relations: BTreeSet<String>,
    facts: BTreeMap<String, Fact>,
    passages: BTreeMap<String, Passage>,
    memories: BTreeMap<String, MemoryRecord>,
    memory_to_passage: BTreeMap<String, String>,
    passage_to_memory: BTreeMap<String, String>,
    entity_to_passages: BTreeMap<String, BTreeSet<String>>,
}

impl KnowledgeGraph {
    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.entities.iter().map(String::as_str)
    }

    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.relations.iter().map(String::as_str)
    }

    pub fn facts(&self) -> impl Iterator<Item = &Fact> {
        self.facts.values()
    }

    pub fn passages(&self) -> impl Iterator<Item = &Passage> {
        self.passages.values()
    }

    pub fn memories(&self) -> impl Iterator<Item = &MemoryRecord> {
        self.memories.values()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }

    pub fn passage_count(&self) -> usize {
        self.passages.len()
    }

    pub fn contains_entity(&self, canonical: &str) -> bool {
        self.entities.contains(canonical)
    }

    pub fn fact(&self, fact_id: &str) -> Option<&Fact> {
        self.facts.get(fact_id)
    }

    pub fn passage(&self, passage_id: &str) -> Option<&Passage> {
        self.passages.get(passage_id)
    }

    pub fn memory(&self, memory_id: &str) -> Option<&MemoryRecord> {
        self.memories.get(memory_id)
    }

    pub fn memory_for_passage(&self, passage_id: &str) -> Option<&MemoryRecord> {
        self.passage_to_memory
            .get(passage_id)
            .and_then(|m| self.memories.get(m))
    }

    pub fn passage_for_memory(&self, memory_id: &str) -> Option<&Passage> {
        self.memory_to_passage
            .get(memory_id)
            .and_then(|p| self.passages.get(p))
    }

    /// Passages an entity occurs in (via the memory that mentions it).
    pub fn passages_for_entity(&self, canonical: &str) -> Option<&BTreeSet<String>> {
        self.entity_to_passages.get(canonical)
    }

    /// `n_v`: how many passages an entity spreads across. Zero only for
    /// entities the graph has never seen.
    pub fn chunk_count(&self, canonical: &str) -> usize {
        self.entity_to_passages
            .get(canonical)
            .map_or(0, BTreeSet::len)
    }
}

/// Builds the knowledge graph from per-passage extraction output.
///
/// `mentions` pairs each memory id with the standalone entities found in it;
/// triple endpoints are unioned in as entities too. Enforces the
/// memory↔passage bijection and referential integrity of every triple.
pub fn build_graph(
    passages: &[Passage],
    memories: &[MemoryRecord],
    mentions: &[(String, Vec<EntityMention>)],
    triples: &[Triple],
) -> Result<KnowledgeGraph> {
    let mut passage_map = BTreeMap::new();
    for p in passages {
        if passage_map.insert(p.passage_id.clone(), p.clone()).is_some() {
            return Err(Error::Graph(format!("duplicate passage id `{}`", p.passage_id)));
        }
    }

    let mut memory_map = BTreeMap::new();
    let mut memory_to_passage = BTreeMap::new();
    let mut passage_to_memory = BTreeMap::new();
    for m in memories {
        if !passage_map.contains_key(&m.passage_id) {
            return Err(Error::Graph(format!(
                "memory `{}` references unknown passage `{}`",
                m.memory_id, m.passage_id
            )));
        }
        if passage_to_memory
            .insert(m.passage_id.clone(), m.memory_id.clone())
            .is_some()
        {
            return Err(Error::Graph(format!(
                "passage `{}` has more than one memory",
                m.passage_id
            )));
        }
        memory_to_passage.insert(m.memory_id.clone(), m.passage_id.clone());
        if memory_map.insert(m.memory_id.clone(), m.clone()).is_some() {
            return Err(Error::Graph(format!("duplicate memory id `{}`", m.memory_id)));
        }
    }
    if memory_map.len() != passage_map.len() {
        return Err(Error::Graph(format!(
            "memory/passage bijection violated: {} memories for {} passages",
            memory_map.len(),
            passage_map.len()
        )));
    }

    let mut entities = BTreeSet::new();
    let mut entity_to_passages: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut link = |entity: &str, memory_id: &str| -> Result<()> {
        let passage_id = memory_to_passage.get(memory_id).ok_or_else(|| {
            Error::Graph(format!("extraction references unknown memory `{memory_id}`"))
        })?;
        entities.insert(entity.to_string());
        entity_to_passages
            .entry(entity.to_string())
            .or_default()
            .insert(passage_id.clone());
        Ok(())
    };

    for (memory_id, mention_list) in mentions {
        for mention in mention_list {
            if !mention.canonical.is_empty() {
                link(&mention.canonical, memory_id)?;
            }
        }
    }

    let mut relations = BTreeSet::new();
    let mut facts = BTreeMap::new();
    let mut seen_facts = HashSet::new();
    let mut seq = 0usize;
    for t in triples {
        if !memory_map.contains_key(&t.memory_id) {
            return Err(Error::Graph(format!(
                "triple ({} | {} | {}) references unknown memory `{}`",
                t.head, t.relation, t.tail, t.memory_id
            )));
        }
        link(&t.head, &t.memory_id)?;
        link(&t.tail, &t.memory_id)?;
        relations.insert(t.relation.clone());
        // Duplicates within one memory collapse; the same statement from
        // different memories stays distinct (it carries new provenance).
        let key = (t.head.clone(), t.relation.clone(), t.tail.clone(), t.memory_id.clone());
        if !seen_facts.insert(key) {
            continue;
        }
        let fact_id = format!("f-{seq:08}");
        seq += 1;
        facts.insert(
            fact_id.clone(),
            Fact {
                fact_id,
                fact_string: format!("{} {} {}", t.head, t.relation, t.tail),
                head: t.head.clone(),
                relation: t.relation.clone(),
                tail: t.tail.clone(),
                memory_id: t.memory_id.clone(),
            },
        );
    }

    Ok(KnowledgeGraph {
        entities,
        relations,
        facts,
        passages: passage_map,
        memories: memory_map,
        memory_to_passage,
        passage_to_memory,
        entity_to_passages,
    })
}

// ---------------------------------------------------------------------------
// Stats
// ---------------------------------------------------------------------------

/// Size report; the `stats` subcommand serializes this verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub entities: usize,
    pub memories: usize,
    pub passages: usize,
    pub relations: usize,
    pub facts: usize,
    /// Entity + memory + passage nodes.
    pub nodes: usize,
    /// Distinct entity–entity pairs connected by at least one fact.
    pub entity_entity_edges: usize,
    /// Distinct entity–passage provenance links.
    pub entity_passage_edges: usize,
    /// Memory↔passage pairings (one per passage by construction).
    pub memory_passage_links: usize,
    /// Fact→memory anchors (one per fact by construction).
    pub fact_memory_links: usize,
    /// Sum of the four edge families above.
    pub edges: usize,
}

pub fn graph_stats(kg: &KnowledgeGraph) -> GraphStats {
    let mut entity_pairs = BTreeSet::new();
    for f in kg.facts() {
        let (a, b) = if f.head <= f.tail {
            (f.head.clone(), f.tail.clone())
        } else {
            (f.tail.clone(), f.head.clone())
        };
        entity_pairs.insert((a, b));
    }
    let entity_passage_edges = kg
        .entity_to_passages
        .values()
        .map(BTreeSet::len)
        .sum::<usize>();
    let (entities, memories, passages) =
        (kg.entities.len(), kg.memories.len(), kg.passages.len());
    GraphStats {
        entities,
        memories,
        passages,
        relations: kg.relations.len(),
        facts: kg.facts.len(),
        nodes: entities + memories + passages,
        entity_entity_edges: entity_pairs.len(),
        entity_passage_edges,
        memory_passage_links: kg.memories.len(),
        fact_memory_links: kg.facts.len(),
        edges: entity_pairs.len() + entity_passage_edges + kg.memories.len() + kg.facts.len(),
    }
}

// ---------------------------------------------------------------------------
// Diffusion view
// ---------------------------------------------------------------------------

/// Node classes in the diffusion view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Entity,
    Passage,
}

/// Column-stochastic random-walk operator over entity and passage nodes.
///
/// Node order is entities (sorted) followed by passages (sorted), so indices
/// are stable for a given graph. `out[j]` lists `(i, w)` entries forming
/// column j — the probability distribution of mass leaving node j — and sums
/// to 1 unless the node is dangling (no edges), in which case the walk
/// redistributes its mass through the restart vector.
#[derive(Debug, Clone)]
pub struct DiffusionGraph<S: Scalar> {
    node_ids: Vec<String>,
    node_index: HashMap<String, usize>,
    n_entities: usize,
    out: Vec<Vec<(usize, S)>>,
    dangling: Vec<usize>,
    chunk_counts: Vec<usize>,
}

impl<S: Scalar> DiffusionGraph<S> {
    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn entity_count(&self) -> usize {
        self.n_entities
    }

    pub fn passage_count(&self) -> usize {
        self.node_ids.len() - self.n_entities
    }

    pub fn node_id(&self, index: usize) -> &str {
        &self.node_ids[index]
    }

    pub fn index_of(&self, node_id: &str) -> Option<usize> {
        self.node_index.get(node_id).copied()
    }

    pub fn kind(&self, index: usize) -> NodeKind {
        if index < self.n_entities {
            NodeKind::Entity
        } else {
            NodeKind::Passage
        }
    }

    /// Column `j` of the walk operator: `(target, probability)` pairs.
    pub fn out_edges(&self, j: usize) -> &[(usize, S)] {
        &self.out[j]
    }

    /// Indices of nodes with no edges at all.
    pub fn dangling_nodes(&self) -> &[usize] {
        &self.dangling
    }

    pub fn is_dangling(&self, index: usize) -> bool {
        self.out[index].is_empty()
    }

    /// `n_v` for the entity at `index` (entities only; passages panic).
    pub fn chunk_count_at(&self, index: usize) -> usize {
        assert!(index < self.n_entities, "chunk counts exist for entity nodes only");
        self.chunk_counts[index]
    }

    /// Entity node indices in order.
    pub fn entity_indices(&self) -> impl Iterator<Item = usize> {
        0..self.n_entities
    }

    /// Passage node indices in order.
    pub fn passage_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.n_entities..self.node_ids.len()
    }
}

/// Builds the diffusion view from the knowledge graph.
///
/// Every fact contributes one unit of weight to its (head, tail) pair;
/// every entity→passage provenance link contributes one unit to that pair.
/// Parallel contributions accumulate, then each non-empty column is divided
/// by its weight sum. Errors on a graph with no nodes.
pub fn build_diffusion_graph<S: Scalar>(kg: &KnowledgeGraph) -> Result<DiffusionGraph<S>> {
    let entity_ids: Vec<&String> = kg.entities.iter().collect();
    let passage_ids: Vec<&String> = kg.passages.keys().collect();
    let n = entity_ids.len() + passage_ids.len();
    if n == 0 {
        return Err(Error::Graph("cannot build a diffusion view of an empty graph".into()));
    }

    let mut node_ids = Vec::with_capacity(n);
    let mut node_index = HashMap::with_capacity(n);
    for id in entity_ids.iter().map(|s| s.as_str()).chain(passage_ids.iter().map(|s| s.as_str()))
    {
        node_index.insert(id.to_string(), node_ids.len());
        node_ids.push(id.to_string());
    }
    let n_entities = entity_ids.len();

    // Accumulate symmetric integer weights; (min, max) keys collapse
    // parallel edges into multiplicities.
    let mut weights: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let add = |a: usize, b: usize, weights: &mut BTreeMap<(usize, usize), usize>| {
        let key = if a <= b { (a, b) } else { (b, a) };
        *weights.entry(key).or_insert(0) += 1;
    };
    for f in kg.facts() {
        let h = node_index[&f.head];
        let t = node_index[&f.tail];
        add(h, t, &mut weights);
    }
    for (entity, passages) in &kg.entity_to_passages {
        let e = node_index[entity];
        for pid in passages {
            let p = node_index[pid];
            add(e, p, &mut weights);
        }
    }

    // Symmetric adjacency, then per-column normalization.
    let mut adjacency: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); n];
    for (&(a, b), &w) in &weights {
        *adjacency[a].entry(b).or_insert(0) += w;
        if a != b {
            *adjacency[b].entry(a).or_insert(0) += w;
        }
    }

    let mut out = Vec::with_capacity(n);
    let mut dangling = Vec::new();
    for (j, neighbors) in adjacency.iter().enumerate() {
        let total: usize = neighbors.values().sum();
        if total == 0 {
            dangling.push(j);
            out.push(Vec::new());
            continue;
        }
        let denom = S::from_f64_lossy(total as f64);
        out.push(
            neighbors
                .iter()
                .map(|(&i, &w)| (i, S::from_f64_lossy(w as f64) / denom))
                .collect(),
        );
    }

    let chunk_counts = entity_ids.iter().map(|e| kg.chunk_count(e)).collect();

    Ok(DiffusionGraph {
        node_ids,
        node_index,
        n_entities,
        out,
        dangling,
        chunk_counts,
    })
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

const GRAPH_MAGIC: &str = "gistrag-graph";
const GRAPH_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct GraphFile {
    magic: String,
    version: u32,
    graph: KnowledgeGraph,
}

/// Writes the graph as a single versioned JSON document (byte-stable: all
/// containers are ordered).
pub fn save_graph(kg: &KnowledgeGraph, path: &Path) -> Result<()> {
    let file = GraphFile {
        magic: GRAPH_MAGIC.into(),
        version: GRAPH_VERSION,
        graph: kg.clone(),
    };
    let writer = BufWriter::new(File::create(path)?);
    serde_json::to_writer(writer, &file).map_err(|e| Error::Persistence {
        path: path.display().to_string(),
        msg: format!("failed to serialize graph: {e}"),
    })
}

/// Reads a graph written by [`save_graph`]. Corruption, truncation, a
/// foreign file, or a version mismatch all surface as
/// [`Error::Persistence`].
pub fn load_graph(path: &Path) -> Result<KnowledgeGraph> {
    let display = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let file: GraphFile = serde_json::from_reader(reader).map_err(|e| Error::Persistence {
        path: display.clone(),
        msg: format!("not a readable graph file: {e}"),
    })?;
    if file.magic != GRAPH_MAGIC {
        return Err(Error::Persistence {
            path: display,
            msg: format!("`{}` is not a knowledge-graph file", file.magic),
        });
    }
    if file.version != GRAPH_VERSION {
        return Err(Error::Persistence {
            path: display,
            msg: format!(
                "unsupported graph version {} (expected {GRAPH_VERSION})",
                file.version
            ),
        });
    }
    Ok(file.graph)
}
