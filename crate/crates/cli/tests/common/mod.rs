//! Shared machinery for the integration suites: a planted corpus with known
//! gold answers, random knowledge-graph generators, and a direct dense
//! solver for the walk's stationary equation.
//!
//! The planted corpus is fully deterministic: 10 single-hop biography
//! passages, 10 comparative film/director clusters (4 passages each), and
//! 150 geographic filler passages — 200 in total. Answers are planted as
//! `[ANS] ... [/ANS]` spans so the offline provider can only produce the
//! right string by ranking the right passage into evidence. Clusters share
//! no tokens with each other, so a comparative question is answerable only
//! by decomposing it and landing both clusters' birth-year passages in the
//! merged evidence.

use std::path::Path;
use std::sync::OnceLock;

use gistrag_cli::config::{Config, EmbedderConfig};
use gistrag_cli::pipeline::{make_embedder, make_provider, run_index};
use gistrag_core::corpus::Passage;
use gistrag_core::eval::{load_queries, QAExample};
use gistrag_core::extract::{EntityMention, MemoryRecord, Triple};
use gistrag_core::graph::{build_graph, GraphStats, KnowledgeGraph};
use gistrag_core::DiffusionGraph64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Planted corpus
// ---------------------------------------------------------------------------

const PEOPLE: [(&str, &str); 10] = [
    ("Elena Marchetti", "Lisbon"),
    ("Tobias Renkvist", "Tallinn"),
    ("Amara Okonkwo", "Marseille"),
    ("Dmitri Volkonsky", "Kyoto"),
    ("Ingrid Halvorsen", "Oslo"),
    ("Rafael Quintana", "Valparaiso"),
    ("Saoirse Gallagher", "Windhoek"),
    ("Kenji Morimoto", "Galway"),
    ("Leila Boutros", "Trieste"),
    ("Piotr Szymanski", "Cusco"),
];

/// `(film, director, birth year)` pairs. The question asks which film's
/// director was born later; the marker sits only in that director's passage.
const CLUSTERS: [[(&str, &str, u16); 2]; 10] = [
    [
        ("Harbor Crossing Nocturne", "Hamish Vandermeer", 1948),
        ("Silent Meridian Gate", "Greta Lindqvist", 1972),
    ],
    [
        ("Velvet Jetty Chronicle", "Ousmane Diallo", 1981),
        ("Paper Lantern Orbit", "Vera Kozlova", 1946),
    ],
    [
        ("Granite Sparrow Waltz", "Niall Brennan", 1953),
        ("Copper Monsoon Lullaby", "Sofia Andrade", 1969),
    ],
    [
        ("Glass Pendulum Reverie", "Janos Kertesz", 1977),
        ("Iron Nightingale Sonata", "Maren Eikeland", 1940),
    ],
    [
        ("Ivory Compass Mirage", "Diego Salazar", 1961),
        ("Obsidian Ferry Hymn", "Yuki Tanabe", 1985),
    ],
    [
        ("Scarlet Telegraph Vigil", "Bruno Castellane", 1937),
        ("Golden Turbine Elegy", "Hanna Virtanen", 1958),
    ],
    [
        ("Misty Viaduct Serenade", "Ettore Bassani", 1974),
        ("Frozen Zephyr Ballad", "Clara Novotna", 1942),
    ],
    [
        ("Wandering Lighthouse Fable", "Ravi Menon", 1966),
        ("Broken Carousel Anthem", "Astrid Bergqvist", 1950),
    ],
    [
        ("Hollow Observatory Requiem", "Farid Azimi", 1939),
        ("Distant Seamstress Overture", "Lucia Herrero", 1983),
    ],
    [
        ("Painted Icebreaker Rhapsody", "Gustav Melchior", 1945),
        ("Quiet Funicular Madrigal", "Noor Khalidi", 1979),
    ],
];

const ADJECTIVES: [&str; 15] = [
    "Amber", "Cobalt", "Verdant", "Ochre", "Sable", "Cerulean", "Russet", "Umber", "Viridian",
    "Sepia", "Magenta", "Teal", "Maroon", "Indigo", "Coral",
];

const NOUNS: [&str; 10] = [
    "Vale", "Bluff", "Moor", "Fen", "Tarn", "Scarp", "Dune", "Atoll", "Ridge", "Basin",
];

const REGIONS: [&str; 10] = [
    "Northern Plateau",
    "Western Steppe",
    "Eastern Lowland",
    "Southern Archipelago",
    "Coastal Shelf",
    "Central Highlands",
    "Upper Karst",
    "Lower Delta",
    "Inland Corridor",
    "Polar Margin",
];

const ASIDES: [&str; 5] = [
    "Hikers cross the area every autumn.",
    "Maps from the last survey mark the paths clearly.",
    "Winters here are long and quiet.",
    "Farmers keep terraced plots along the slopes.",
    "Storms reshape the shoreline every spring.",
];

pub struct PlantedQuery {
    pub question: String,
    pub answers: Vec<String>,
    pub gold_passage_ids: Vec<String>,
}

/// Builds the 200-document corpus (as JSONL text) and its 20 questions.
pub fn planted_corpus() -> (String, Vec<PlantedQuery>) {
    let mut lines = Vec::with_capacity(200);
    let mut queries = Vec::with_capacity(20);
    let doc = |id: &str, text: String| {
        serde_json::json!({ "id": id, "text": text }).to_string()
    };

    for (i, (person, city)) in PEOPLE.iter().enumerate() {
        let id = format!("born-{:02}", i + 1);
        let text = format!(
            "{person} was born in {city}.\n{person} | born in | {city}\nnotes: [ANS] {city} [/ANS]"
        );
        lines.push(doc(&id, text));
        queries.push(PlantedQuery {
            question: format!("Where was {person} born?"),
            answers: vec![city.to_string()],
            gold_passage_ids: vec![format!("{id}#0000")],
        });
    }

    for (i, pair) in CLUSTERS.iter().enumerate() {
        let later = if pair[0].2 > pair[1].2 { 0 } else { 1 };
        for (side, &(film, director, year)) in pair.iter().enumerate() {
            let tag = if side == 0 { 'a' } else { 'b' };
            lines.push(doc(
                &format!("film-{:02}{tag}", i + 1),
                format!("{film} is a film directed by {director}.\n{film} | directed by | {director}"),
            ));
            let mut text = format!(
                "{film} has a director born in {year}.\n{film} | director born in | {year}"
            );
            if side == later {
                text.push_str(&format!("\nnotes: [ANS] {film} [/ANS]"));
            }
            lines.push(doc(&format!("director-{:02}{tag}", i + 1), text));
        }
        queries.push(PlantedQuery {
            question: format!(
                "Which film has the director born later, {} or {}?",
                pair[0].0, pair[1].0
            ),
            answers: vec![pair[later].0.to_string()],
            gold_passage_ids: vec![
                format!("director-{:02}a#0000", i + 1),
                format!("director-{:02}b#0000", i + 1),
            ],
        });
    }

    let mut filler = 0usize;
    for adj in ADJECTIVES {
        for noun in NOUNS {
            filler += 1;
            let name = format!("{adj} {noun}");
            let region = REGIONS[filler % REGIONS.len()];
            let aside = ASIDES[filler % ASIDES.len()];
            lines.push(doc(
                &format!("place-{filler:03}"),
                format!("{name} lies in the {region}.\n{aside}\n{name} | located in | {region}"),
            ));
        }
    }

    (lines.join("\n") + "\n", queries)
}

/// Config for a planted-corpus store rooted at `dir`. Two knobs are sized to
/// the corpus rather than left at stock values: the hash dimension is
/// widened so feature-collision similarity stays well below the planted
/// lexical signal, and the fact cut is narrowed because the stock value (50,
/// tuned for corpora with orders of magnitude more facts) would let a
/// quarter of this corpus's 200 facts seed every query.
pub fn planted_config(dir: &Path) -> Config {
    let mut config = Config {
        corpus: dir.join("corpus.jsonl"),
        store_dir: dir.join("store"),
        max_tokens: gistrag_core::corpus::DEFAULT_MAX_TOKENS,
        provider: Default::default(),
        embedder: EmbedderConfig {
            dimension: 2048,
            ..Default::default()
        },
        diffusion: Default::default(),
        rerank: Default::default(),
        retrieval: Default::default(),
        eval: Default::default(),
    };
    config.diffusion.k_facts = 3;
    config.validate().expect("planted config is valid");
    config
}

/// The planted corpus, indexed once and shared by every test that needs it.
/// Tests must treat the store as read-only; anything destructive works on
/// its own copy.
pub struct Fixture {
    /// Owns the temp directory for the lifetime of the test binary.
    pub dir: tempfile::TempDir,
    pub config: Config,
    pub examples: Vec<QAExample>,
    pub queries: Vec<PlantedQuery>,
    pub stats: GraphStats,
}

impl Fixture {
    /// A sibling config writing to a fresh store directory under the same
    /// temp root (for rebuild/determinism tests).
    pub fn config_with_store(&self, name: &str) -> Config {
        let mut config = self.config.clone();
        config.store_dir = self.dir.path().join(name);
        config
    }
}

pub fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = tempfile::tempdir().expect("create temp dir");
        let (corpus, queries) = planted_corpus();
        std::fs::write(dir.path().join("corpus.jsonl"), corpus).expect("write corpus");

        let query_lines: String = queries
            .iter()
            .map(|q| {
                serde_json::json!({
                    "question": q.question,
                    "answers": q.answers,
                    "gold_passage_ids": q.gold_passage_ids,
                })
                .to_string()
                    + "\n"
            })
            .collect();
        std::fs::write(dir.path().join("queries.jsonl"), query_lines).expect("write queries");

        let config = planted_config(dir.path());
        let provider = make_provider(&config, true).expect("mock provider");
        let embedder = make_embedder(&config, true).expect("hash embedder");
        let stats =
            run_index(&config, provider.as_ref(), embedder.as_ref(), false).expect("index");
        let examples = load_queries(&dir.path().join("queries.jsonl")).expect("load queries");

        Fixture {
            dir,
            config,
            examples,
            queries,
            stats,
        }
    })
}

// ---------------------------------------------------------------------------
// Random graphs
// ---------------------------------------------------------------------------

pub fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(tag)
}

/// A random but well-formed knowledge graph: `memory <-> passage` stays a
/// bijection, every entity is mentioned somewhere, and exactly the first
/// `dangling` passages carry no mentions (and no triples), so they become
/// dangling columns in the diffusion graph. With `dangling == 0` every node
/// has at least one edge.
pub fn random_kg(
    rng: &mut ChaCha8Rng,
    max_entities: usize,
    max_passages: usize,
    dangling: usize,
    with_triples: bool,
) -> KnowledgeGraph {
    let n_entities = rng.gen_range(2..=max_entities);
    let n_passages = rng.gen_range((dangling + 1).max(2)..=max_passages.max(dangling + 2));
    let entities: Vec<String> = (0..n_entities).map(|i| format!("e{i:03}")).collect();

    let mut passages = Vec::with_capacity(n_passages);
    let mut memories = Vec::with_capacity(n_passages);
    for j in 0..n_passages {
        passages.push(Passage {
            passage_id: format!("p{j:03}#0000"),
            doc_id: format!("p{j:03}"),
            ordinal: 0,
            text: format!("synthetic passage {j}"),
        });
        memories.push(MemoryRecord {
            memory_id: format!("m{j:03}"),
            passage_id: format!("p{j:03}#0000"),
            think_text: String::new(),
            memory_text: format!("synthetic memory {j}"),
        });
    }

    let mention = |name: &str| EntityMention {
        surface: name.to_string(),
        canonical: name.to_string(),
    };
    let mut mentions: Vec<(String, Vec<EntityMention>)> = memories
        .iter()
        .map(|m| (m.memory_id.clone(), Vec::new()))
        .collect();
    for slot in mentions.iter_mut().skip(dangling) {
        let count = rng.gen_range(1..=3.min(n_entities));
        for name in entities.choose_multiple(rng, count) {
            slot.1.push(mention(name));
        }
    }
    // Cover entities the sampling above missed.
    for name in &entities {
        if !mentions[dangling..]
            .iter()
            .any(|(_, ms)| ms.iter().any(|m| &m.canonical == name))
        {
            let j = rng.gen_range(dangling..n_passages);
            mentions[j].1.push(mention(name));
        }
    }

    let mut triples = Vec::new();
    if with_triples {
        const RELATIONS: [&str; 3] = ["linked to", "peer of", "variant of"];
        for _ in 0..rng.gen_range(0..=n_entities) {
            let head = entities.choose(rng).unwrap().clone();
            let tail = entities.choose(rng).unwrap().clone();
            let j = rng.gen_range(dangling..n_passages);
            triples.push(Triple {
                head,
                relation: RELATIONS.choose(rng).unwrap().to_string(),
                tail,
                memory_id: format!("m{j:03}"),
            });
        }
    }

    build_graph(&passages, &memories, &mentions, &triples).expect("random graph is well-formed")
}

/// A random seed vector: positive mass on a nonempty random subset of entity
/// nodes, zero elsewhere.
pub fn random_seed(rng: &mut ChaCha8Rng, dg: &DiffusionGraph64) -> Vec<f64> {
    let mut seed = vec![0.0; dg.node_count()];
    let entities: Vec<usize> = dg.entity_indices().collect();
    let picks = rng.gen_range(1..=entities.len());
    for &i in entities.choose_multiple(rng, picks) {
        seed[i] = rng.gen_range(0.1..2.0);
    }
    seed
}

// ---------------------------------------------------------------------------
// Dense stationary solver
// ---------------------------------------------------------------------------

/// Solves the walk's fixed-point equation directly instead of iterating:
///
/// ```text
/// (I - (1-g) * (W + pi0 * 1_D^T)) x = g * pi0
/// ```
///
/// where `W` holds the column-normalized edge weights, `D` is the dangling
/// set, and `pi0` is the normalized seed. Gaussian elimination with partial
/// pivoting; fine for the few hundred nodes the tests use.
pub fn solve_stationary(dg: &DiffusionGraph64, seed: &[f64], gamma: f64) -> Vec<f64> {
    let n = dg.node_count();
    assert_eq!(seed.len(), n, "seed length must match node count");
    let total: f64 = seed.iter().sum();
    assert!(total > 0.0, "seed must carry positive mass");
    let pi0: Vec<f64> = seed.iter().map(|v| v / total).collect();

    let mut a = vec![vec![0.0f64; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for j in 0..n {
        for &(i, w) in dg.out_edges(j) {
            a[i][j] -= (1.0 - gamma) * w;
        }
        if dg.is_dangling(j) {
            for (i, p) in pi0.iter().enumerate() {
                a[i][j] -= (1.0 - gamma) * p;
            }
        }
    }
    let mut b: Vec<f64> = pi0.iter().map(|v| gamma * v).collect();

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())
            .unwrap();
        assert!(a[pivot][col].abs() > 1e-12, "system is singular");
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}
