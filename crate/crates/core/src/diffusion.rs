//! Entity diffusion: spreading query relevance through the graph.
//!
//! The walk starts from a seed distribution built out of fact evidence.
//! Query-fact cosine similarities pick the top-K facts; each entity is
//! scored by the mean similarity of the top facts it participates in
//! (`fact`), boosted by a saturating frequency reward (`reward`), and
//! discounted by how many passages it spreads across. The normalized seed
//! feeds a restart walk over the column-stochastic graph view, and the
//! stationary activation of passage nodes becomes the structural relevance
//! score used downstream.

use std::collections::BTreeMap;

use crate::embed::{cosine, Embedding, VectorIndex};
use crate::graph::{DiffusionGraph, KnowledgeGraph, NodeKind};
use crate::scalar::Scalar;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Knobs for seed construction and the restart walk.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionParams<S: Scalar> {
    /// How many top-scoring facts anchor the seed.
    pub k_facts: usize,
    /// Frequency-reward ceiling: reward approaches `1 + alpha`.
    pub alpha: S,
    /// Frequency-reward saturation rate.
    pub beta: S,
    /// Restart probability: fraction of mass teleported to the seed each step.
    pub gamma: S,
    /// L1 convergence threshold between successive activations.
    pub tol: S,
    /// Iteration cap; hitting it flags the run as unconverged.
    pub max_iters: usize,
}

impl<S: Scalar> Default for DiffusionParams<S> {
    fn default() -> Self {
        Self {
            k_facts: 50,
            alpha: S::from_f64_lossy(2.0),
            beta: S::from_f64_lossy(1.0),
            gamma: S::from_f64_lossy(0.5),
            tol: S::from_f64_lossy(1e-8),
            max_iters: 200,
        }
    }
}

impl<S: Scalar> DiffusionParams<S> {
    /// Rejects values the walk cannot run with.
    pub fn validate(&self) -> Result<()> {
        if self.k_facts == 0 {
            return Err(Error::InvalidInput("k_facts must be at least 1".into()));
        }
        if !(self.gamma > S::zero() && self.gamma <= S::one()) {
            return Err(Error::InvalidInput(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if self.alpha < S::zero() {
            return Err(Error::InvalidInput(format!(
                "alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        if self.beta < S::zero() {
            return Err(Error::InvalidInput(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        if !(self.tol > S::zero()) {
            return Err(Error::InvalidInput(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Seed construction
// ---------------------------------------------------------------------------

/// Cosine similarity of the query against every fact in the index,
/// returned sorted by score descending (ties broken by fact id ascending).
pub fn fact_similarities<S: Scalar>(
    query: &Embedding<S>,
    fact_index: &VectorIndex<S>,
) -> Result<Vec<(String, S)>> {
    let mut scored = Vec::with_capacity(fact_index.len());
    for (id, vector) in fact_index.iter() {
        scored.push((id.to_string(), cosine(query, vector)?));
    }
    crate::embed::sort_scored(&mut scored);
    Ok(scored)
}

/// The first `k` entries of a similarity ranking (all of them if fewer).
pub fn top_k_facts<S: Scalar>(similarities: &[(String, S)], k: usize) -> Vec<(String, S)> {
    similarities.iter().take(k).cloned().collect()
}

/// Mean similarity of the top facts an entity participates in; zero for an
/// entity that touches none of them.
pub fn entity_fact_score<S: Scalar>(
    canonical: &str,
    top_facts: &[(String, S)],
    kg: &KnowledgeGraph,
) -> S {
    let mut sum = S::zero();
    let mut hits = 0usize;
    for (fact_id, score) in top_facts {
        let Some(fact) = kg.fact(fact_id) else { continue };
        if fact.head == canonical || fact.tail == canonical {
            sum += *score;
            hits += 1;
        }
    }
    if hits == 0 {
        S::zero()
    } else {
        sum / S::from_f64_lossy(hits as f64)
    }
}

/// Saturating boost for entities backed by many top facts:
/// `1 + alpha * (1 - exp(-beta * count))`. Equals 1 at count 0 and is
/// bounded above by `1 + alpha`.
pub fn frequency_reward<S: Scalar>(count: usize, alpha: S, beta: S) -> S {
    let c = S::from_f64_lossy(count as f64);
    S::one() + alpha * (S::one() - (-beta * c).exp())
}

/// Unnormalized seed weight of one entity: fact score times reward,
/// discounted by the passage spread `n_v` (floored at 1 so unseen entities
/// don't divide by zero).
pub fn activation_weight<S: Scalar>(fact_score: S, reward: S, n_v: usize) -> S {
    fact_score * reward / S::from_f64_lossy(n_v.max(1) as f64)
}

/// A dense activation over diffusion-graph nodes, indexed like the graph.
pub type ActivationVector<S> = Vec<S>;

/// Builds the normalized seed distribution from top-fact evidence.
///
/// Counts, per entity, how many of the top facts it appears in; entities in
/// none of them (and all passage nodes) seed at zero. Returns `Ok(None)`
/// when no entity gets positive mass — the caller should fall back to dense
/// retrieval rather than walk from nothing.
pub fn initial_activation<S: Scalar>(
    top_facts: &[(String, S)],
    kg: &KnowledgeGraph,
    dg: &DiffusionGraph<S>,
    params: &DiffusionParams<S>,
) -> Result<Option<ActivationVector<S>>> {
    params.validate()?;

    // One pass over the top facts accumulates, per entity, the similarity
    // sum and the fact count — enough for both `fact` and `reward`.
    let mut sums: BTreeMap<&str, (S, usize)> = BTreeMap::new();
    for (fact_id, score) in top_facts {
        let fact = kg.fact(fact_id).ok_or_else(|| {
            Error::Graph(format!("top fact `{fact_id}` is not in the graph"))
        })?;
        for endpoint in [fact.head.as_str(), fact.tail.as_str()] {
            let entry = sums.entry(endpoint).or_insert((S::zero(), 0));
            entry.0 += *score;
            entry.1 += 1;
        }
        // Self-loops (head == tail) count the endpoint twice, matching the
        // multiplicity the fact contributes to the walk operator.
    }

    let mut seed = vec![S::zero(); dg.node_count()];
    let mut total = S::zero();
    for (entity, (sum, count)) in &sums {
        let Some(index) = dg.index_of(entity) else {
            return Err(Error::Graph(format!(
                "entity `{entity}` from top facts is missing from the diffusion view"
            )));
        };
        let fact_score = *sum / S::from_f64_lossy(*count as f64);
        let reward = frequency_reward(*count, params.alpha, params.beta);
        let weight = activation_weight(fact_score, reward, dg.chunk_count_at(index));
        if weight > S::zero() {
            seed[index] = weight;
            total += weight;
        }
    }

    if total <= S::zero() {
        return Ok(None);
    }
    for w in &mut seed {
        *w /= total;
    }
    Ok(Some(seed))
}

// ---------------------------------------------------------------------------
// The restart walk
// ---------------------------------------------------------------------------

/// Outcome of a diffusion run.
#[derive(Debug, Clone)]
pub struct DiffusionRun<S: Scalar> {
    /// Stationary (or last) activation over all diffusion-graph nodes.
    pub activation: ActivationVector<S>,
    pub converged: bool,
    pub iterations: usize,
    /// L1 distance between the final two iterates.
    pub last_delta: S,
}

/// Runs the restart walk to convergence. See [`diffuse_observed`].
pub fn diffuse<S: Scalar>(
    seed: &ActivationVector<S>,
    dg: &DiffusionGraph<S>,
    params: &DiffusionParams<S>,
) -> Result<DiffusionRun<S>> {
    diffuse_observed(seed, dg, params, |_, _| {})
}

/// Runs the restart walk, invoking `observer(iteration, activation)` after
/// every update (useful for invariant checks).
///
/// Each step propagates mass along normalized columns, routes the mass
/// sitting on dangling nodes back through the seed, and teleports a `gamma`
/// fraction to the seed:
///
/// ```text
/// next = (1 - gamma) * (W . pi + dangling_mass * seed) + gamma * seed
/// ```
///
/// Both terms are distributions, so every iterate sums to 1 exactly (up to
/// rounding). The seed is re-normalized internally, so callers may pass any
/// non-negative vector with positive mass.
pub fn diffuse_observed<S: Scalar>(
    seed: &ActivationVector<S>,
    dg: &DiffusionGraph<S>,
    params: &DiffusionParams<S>,
    mut observer: impl FnMut(usize, &[S]),
) -> Result<DiffusionRun<S>> {
    params.validate()?;
    let n = dg.node_count();
    if seed.len() != n {
        return Err(Error::InvalidInput(format!(
            "seed has {} entries for a graph of {} nodes",
            seed.len(),
            n
        )));
    }
    let mut total = S::zero();
    for &w in seed {
        if w < S::zero() || !w.is_finite() {
            return Err(Error::InvalidInput(
                "seed activations must be finite and non-negative".into(),
            ));
        }
        total += w;
    }
    if total <= S::zero() {
        return Err(Error::InvalidInput("seed has no positive mass".into()));
    }
    let pi0: Vec<S> = seed.iter().map(|&w| w / total).collect();

    let gamma = params.gamma;
    let keep = S::one() - gamma;
    let mut pi = pi0.clone();
    let mut iterations = 0usize;
    let mut last_delta = S::infinity();
    let mut converged = false;

    while iterations < params.max_iters {
        let mut next = vec![S::zero(); n];
        let mut dangling_mass = S::zero();
        for j in 0..n {
            let mass = pi[j];
            if mass == S::zero() {
                continue;
            }
            let column = dg.out_edges(j);
            if column.is_empty() {
                dangling_mass += mass;
                continue;
            }
            for &(i, w) in column {
                next[i] += mass * w;
            }
        }
        for i in 0..n {
            next[i] = keep * (next[i] + dangling_mass * pi0[i]) + gamma * pi0[i];
        }

        let mut delta = S::zero();
        for i in 0..n {
            delta += (next[i] - pi[i]).abs();
        }
        pi = next;
        iterations += 1;
        last_delta = delta;
        observer(iterations, &pi);
        if delta < params.tol {
            converged = true;
            break;
        }
    }

    if !converged {
        log::warn!(
            "diffusion hit the {}-iteration cap with delta {last_delta} (tol {})",
            params.max_iters,
            params.tol
        );
    }
    Ok(DiffusionRun {
        activation: pi,
        converged,
        iterations,
        last_delta,
    })
}

/// Projects a converged activation onto passage nodes, keyed by passage id.
pub fn passage_diffusion_scores<S: Scalar>(
    run: &DiffusionRun<S>,
    dg: &DiffusionGraph<S>,
) -> BTreeMap<String, S> {
    let mut scores = BTreeMap::new();
    for i in dg.passage_indices() {
        debug_assert_eq!(dg.kind(i), NodeKind::Passage);
        scores.insert(dg.node_id(i).to_string(), run.activation[i]);
    }
    scores
}
