//! Score fusion and final passage ranking.
//!
//! Structural relevance (diffusion mass) and semantic relevance (dense
//! cosine) live on incompatible scales, so each side is min-max normalized
//! over the candidate set before a convex blend. For decomposed queries,
//! per-sub-query rankings are merged with a quota scheme that guarantees
//! every sub-query keeps a voice in the final top-K.

use std::collections::{BTreeMap, BTreeSet};

use crate::embed::{Embedding, VectorIndex};
use crate::graph::KnowledgeGraph;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Default blend weight on the structural (diffusion) side.
pub const DEFAULT_EPSILON: f64 = 0.95;
/// Default guard added to min-max denominators.
pub const DEFAULT_DELTA: f64 = 1e-8;
/// Default dense pool size feeding the candidate set.
pub const DEFAULT_N_DENSE: usize = 200;

/// One passage with its raw per-channel scores and the fused result.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPassage<S: Scalar> {
    pub passage_id: String,
    /// Raw diffusion mass (zero if the walk never reached it).
    pub s_diff: S,
    /// Raw query-passage cosine (imputed when outside the dense pool).
    pub s_sim: S,
    /// Convex blend of the normalized channels.
    pub s_fused: S,
}

/// A passage paired with the memory distilled from it — what the answerer
/// actually reads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidencePair {
    pub passage_id: String,
    pub passage_text: String,
    pub memory_id: String,
    pub memory_text: String,
}

// ---------------------------------------------------------------------------
// Normalization and fusion
// ---------------------------------------------------------------------------

/// Min-max rescale into [0, 1] with a `delta` guard on the denominator:
/// `(x - min) / (max - min + delta)`. A constant slice maps to all zeros;
/// an empty slice stays empty.
pub fn minmax_normalize<S: Scalar>(scores: &[S], delta: S) -> Vec<S> {
    let Some(first) = scores.first() else {
        return Vec::new();
    };
    let mut lo = *first;
    let mut hi = *first;
    for &s in scores {
        if s < lo {
            lo = s;
        }
        if s > hi {
            hi = s;
        }
    }
    scores.iter().map(|&s| (s - lo) / (hi - lo + delta)).collect()
}

/// Fills gaps so both channels cover the same id set: an id missing from a
/// side takes that side's minimum raw score (so it can't outrank anything
/// the side actually scored). Returns aligned `(ids, diff, sim)` with ids
/// sorted ascending.
pub fn impute_missing<S: Scalar>(
    raw_diff: &BTreeMap<String, S>,
    raw_sim: &BTreeMap<String, S>,
) -> (Vec<String>, Vec<S>, Vec<S>) {
    let ids: Vec<String> = raw_diff
        .keys()
        .chain(raw_sim.keys())
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let min_of = |m: &BTreeMap<String, S>| {
        m.values().copied().fold(None, |acc: Option<S>, v| match acc {
            Some(a) if a <= v => Some(a),
            _ => Some(v),
        })
    };
    let diff_floor = min_of(raw_diff).unwrap_or_else(S::zero);
    let sim_floor = min_of(raw_sim).unwrap_or_else(S::zero);
    let diff: Vec<S> = ids
        .iter()
        .map(|id| raw_diff.get(id).copied().unwrap_or(diff_floor))
        .collect();
    let sim: Vec<S> = ids
        .iter()
        .map(|id| raw_sim.get(id).copied().unwrap_or(sim_floor))
        .collect();
    (ids, diff, sim)
}

/// Convex blend of two already-normalized channels:
/// `epsilon * diff + (1 - epsilon) * sim`, preserving input order.
pub fn fuse<S: Scalar>(norm_diff: &[S], norm_sim: &[S], epsilon: S) -> Result<Vec<S>> {
    if norm_diff.len() != norm_sim.len() {
        return Err(Error::InvalidInput(format!(
            "channel lengths differ: {} vs {}",
            norm_diff.len(),
            norm_sim.len()
        )));
    }
    if !(epsilon >= S::zero() && epsilon <= S::one()) {
        return Err(Error::InvalidInput(format!(
            "epsilon must lie in [0, 1], got {epsilon}"
        )));
    }
    Ok(norm_diff
        .iter()
        .zip(norm_sim)
        .map(|(&d, &s)| epsilon * d + (S::one() - epsilon) * s)
        .collect())
}

/// Full candidate ranking: impute gaps, normalize each channel over the
/// candidate set, blend, and sort by fused score descending (ties broken by
/// passage id ascending). Raw scores ride along for inspection.
pub fn rank_candidates<S: Scalar>(
    raw_diff: &BTreeMap<String, S>,
    raw_sim: &BTreeMap<String, S>,
    epsilon: S,
    delta: S,
) -> Result<Vec<RankedPassage<S>>> {
    if !(delta > S::zero()) {
        return Err(Error::InvalidInput(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let (ids, diff, sim) = impute_missing(raw_diff, raw_sim);
    let norm_diff = minmax_normalize(&diff, delta);
    let norm_sim = minmax_normalize(&sim, delta);
    let fused = fuse(&norm_diff, &norm_sim, epsilon)?;
    let mut ranked: Vec<RankedPassage<S>> = ids
        .into_iter()
        .enumerate()
        .map(|(i, passage_id)| RankedPassage {
            passage_id,
            s_diff: diff[i],
            s_sim: sim[i],
            s_fused: fused[i],
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.s_fused
            .partial_cmp(&a.s_fused)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.passage_id.cmp(&b.passage_id))
    });
    Ok(ranked)
}

// ---------------------------------------------------------------------------
// Candidate set
// ---------------------------------------------------------------------------

/// Assembles the pool a sub-query is ranked over: every passage the walk
/// put positive mass on, unioned with the `n_dense` nearest passages by
/// embedding. Returns `(raw_diff, raw_sim)` restricted to that pool, with
/// the dense channel holding true cosines for its top pool (gaps are
/// imputed later). Errors if the passage index is empty.
pub fn candidate_set<S: Scalar>(
    query: &Embedding<S>,
    passage_index: &VectorIndex<S>,
    diffusion_scores: &BTreeMap<String, S>,
    n_dense: usize,
) -> Result<(BTreeMap<String, S>, BTreeMap<String, S>)> {
    if passage_index.len() == 0 {
        return Err(Error::InvalidInput(
            "cannot retrieve from an empty passage index".into(),
        ));
    }
    if n_dense == 0 {
        return Err(Error::InvalidInput("n_dense must be at least 1".into()));
    }
    let dense = crate::embed::top_k(passage_index, query, n_dense)?;
    let mut raw_sim = BTreeMap::new();
    for (id, score) in &dense {
        raw_sim.insert(id.clone(), *score);
    }
    let mut raw_diff = BTreeMap::new();
    for (id, &score) in diffusion_scores {
        if score > S::zero() {
            raw_diff.insert(id.clone(), score);
        }
    }
    Ok((raw_diff, raw_sim))
}

// ---------------------------------------------------------------------------
// Multi-query merge
// ---------------------------------------------------------------------------

/// Merges per-sub-query rankings into one final top-`k` list.
///
/// With one list this is a plain truncation. With `m` lists, each list
/// first contributes its best `floor((k - 1) / m)` unseen passages in rank
/// order; the remaining slots are filled from the union of all lists by
/// best fused score (each passage counted at its maximum across lists,
/// ties by passage id ascending). Returns up to `k` pairs — fewer only when
/// the union itself is smaller.
pub fn merge_rankings<S: Scalar>(
    per_query: &[Vec<RankedPassage<S>>],
    k: usize,
) -> Result<Vec<RankedPassage<S>>> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if per_query.is_empty() {
        return Err(Error::InvalidInput("no rankings to merge".into()));
    }
    if per_query.len() == 1 {
        return Ok(per_query[0].iter().take(k).cloned().collect());
    }

    let quota = (k - 1) / per_query.len();
    let mut chosen: Vec<RankedPassage<S>> = Vec::with_capacity(k);
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for ranking in per_query {
        let mut taken = 0;
        for rp in ranking {
            if taken == quota {
                break;
            }
            if seen.insert(rp.passage_id.clone()) {
                chosen.push(rp.clone());
                taken += 1;
            }
        }
    }

    // Backfill from the union, best fused score first. A passage appearing
    // in several lists competes with its strongest showing.
    let mut best: BTreeMap<String, RankedPassage<S>> = BTreeMap::new();
    for rp in per_query.iter().flatten() {
        best.entry(rp.passage_id.clone())
            .and_modify(|cur| {
                if rp.s_fused > cur.s_fused {
                    *cur = rp.clone();
                }
            })
            .or_insert_with(|| rp.clone());
    }
    let mut pool: Vec<&RankedPassage<S>> = best.values().collect();
    pool.sort_by(|a, b| {
        b.s_fused
            .partial_cmp(&a.s_fused)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.passage_id.cmp(&b.passage_id))
    });
    for rp in pool {
        if chosen.len() == k {
            break;
        }
        if seen.insert(rp.passage_id.clone()) {
            chosen.push(rp.clone());
        }
    }
    Ok(chosen)
}

// ---------------------------------------------------------------------------
// Evidence assembly
// ---------------------------------------------------------------------------

/// Resolves ranked passages into (passage, memory) evidence pairs via the
/// graph's bijection. A passage without a memory is a broken graph and an
/// error, not a silent skip.
pub fn assemble_evidence<S: Scalar>(
    ranked: &[RankedPassage<S>],
    kg: &KnowledgeGraph,
) -> Result<Vec<EvidencePair>> {
    ranked
        .iter()
        .map(|rp| {
            let passage = kg.passage(&rp.passage_id).ok_or_else(|| {
                Error::Graph(format!("ranked passage `{}` is not in the graph", rp.passage_id))
            })?;
            let memory = kg.memory_for_passage(&rp.passage_id).ok_or_else(|| {
                Error::Graph(format!("passage `{}` has no memory", rp.passage_id))
            })?;
            Ok(EvidencePair {
                passage_id: passage.passage_id.clone(),
                passage_text: passage.text.clone(),
                memory_id: memory.memory_id.clone(),
                memory_text: memory.memory_text.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rp(id: &str, fused: f64) -> RankedPassage<f64> {
        RankedPassage {
            passage_id: id.into(),
            s_diff: fused,
            s_sim: fused,
            s_fused: fused,
        }
    }

    fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    // ---- normalization ---------------------------------------------------

    #[test]
    fn minmax_maps_a_spread_to_the_unit_interval() {
        let out = minmax_normalize(&[2.0_f64, 4.0, 6.0], 1e-8);
        assert!((out[0] - 0.0).abs() < 1e-8);
        assert!((out[1] - 0.5).abs() < 1e-8);
        assert!((out[2] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn minmax_sends_constant_slices_to_zero() {
        let out = minmax_normalize(&[3.0_f64; 4], 1e-8);
        assert_eq!(out, vec![0.0; 4]);
        assert_eq!(minmax_normalize::<f64>(&[], 1e-8), Vec::<f64>::new());
    }

    #[test]
    fn minmax_is_monotone() {
        let raw = [0.3_f64, -1.0, 2.5, 0.3, 7.0];
        let out = minmax_normalize(&raw, 1e-8);
        for i in 0..raw.len() {
            for j in 0..raw.len() {
                assert_eq!(raw[i] < raw[j], out[i] < out[j]);
            }
        }
    }

    // ---- imputation -------------------------------------------------------

    #[test]
    fn missing_scores_take_the_sides_minimum() {
        let diff = map(&[("p1", 0.6), ("p2", 0.2)]);
        let sim = map(&[("p2", 0.9), ("p3", 0.4)]);
        let (ids, d, s) = impute_missing(&diff, &sim);
        assert_eq!(ids, vec!["p1", "p2", "p3"]);
        assert_eq!(d, vec![0.6, 0.2, 0.2]); // p3 imputed at diff min
        assert_eq!(s, vec![0.4, 0.9, 0.4]); // p1 imputed at sim min
    }

    #[test]
    fn imputed_ids_never_outrank_scored_ones_on_that_side() {
        let diff = map(&[("a", 0.5), ("b", 0.1)]);
        let sim = map(&[("c", 0.7)]);
        let ranked = rank_candidates(&diff, &sim, 1.0, 1e-8).unwrap();
        // epsilon=1: order by diff alone; c is imputed at 0.1 and must not
        // beat a.
        assert_eq!(ranked[0].passage_id, "a");
    }

    // ---- fusion -----------------------------------------------------------

    #[test]
    fn epsilon_one_ranks_by_structure_alone() {
        let diff = map(&[("a", 3.0), ("b", 2.0), ("c", 1.0)]);
        let sim = map(&[("a", 0.1), ("b", 0.2), ("c", 0.9)]);
        let ranked = rank_candidates(&diff, &sim, 1.0, 1e-8).unwrap();
        let order: Vec<&str> = ranked.iter().map(|r| r.passage_id.as_str()).collect();
        assert_eq!(order, vec!["a", "b", "c"]);
    }

    #[test]
    fn epsilon_zero_ranks_by_similarity_alone() {
        let diff = map(&[("a", 3.0), ("b", 2.0), ("c", 1.0)]);
        let sim = map(&[("a", 0.1), ("b", 0.2), ("c", 0.9)]);
        let ranked = rank_candidates(&diff, &sim, 0.0, 1e-8).unwrap();
        let order: Vec<&str> = ranked.iter().map(|r| r.passage_id.as_str()).collect();
        assert_eq!(order, vec!["c", "b", "a"]);
    }

    #[test]
    fn fused_ties_break_by_passage_id() {
        let diff = map(&[("z", 1.0), ("a", 1.0), ("m", 1.0)]);
        let sim = map(&[("z", 1.0), ("a", 1.0), ("m", 1.0)]);
        let ranked = rank_candidates(&diff, &sim, 0.5, 1e-8).unwrap();
        let order: Vec<&str> = ranked.iter().map(|r| r.passage_id.as_str()).collect();
        assert_eq!(order, vec!["a", "m", "z"]);
    }

    #[test]
    fn raw_scores_survive_into_the_ranking() {
        let diff = map(&[("a", 0.25)]);
        let sim = map(&[("a", 0.5)]);
        let ranked = rank_candidates(&diff, &sim, 0.95, 1e-8).unwrap();
        assert_eq!(ranked[0].s_diff, 0.25);
        assert_eq!(ranked[0].s_sim, 0.5);
    }

    #[test]
    fn all_zero_diffusion_degenerates_to_the_dense_channel() {
        // No anchor: every diffusion score is 0 (constant -> normalized to
        // zeros), so fused order is driven by similarity even at high
        // epsilon.
        let diff = map(&[("a", 0.0), ("b", 0.0), ("c", 0.0)]);
        let sim = map(&[("a", 0.2), ("b", 0.9), ("c", 0.5)]);
        let ranked = rank_candidates(&diff, &sim, 0.95, 1e-8).unwrap();
        let order: Vec<&str> = ranked.iter().map(|r| r.passage_id.as_str()).collect();
        assert_eq!(order, vec!["b", "c", "a"]);
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let diff = map(&[("a", 1.0)]);
        let sim = map(&[("a", 1.0)]);
        assert!(rank_candidates(&diff, &sim, 1.5, 1e-8).is_err());
        assert!(rank_candidates(&diff, &sim, -0.1, 1e-8).is_err());
        assert!(rank_candidates(&diff, &sim, 0.5, 0.0).is_err());
        assert!(fuse(&[1.0_f64], &[1.0, 2.0], 0.5).is_err());
    }

    // ---- merge ------------------------------------------------------------

    #[test]
    fn single_ranking_truncates() {
        let lists = vec![vec![rp("a", 0.9), rp("b", 0.8), rp("c", 0.7)]];
        let merged = merge_rankings(&lists, 2).unwrap();
        let order: Vec<&str> = merged.iter().map(|r| r.passage_id.as_str()).collect();
        assert_eq!(order, vec!["a", "b"]);
    }

    #[test]
    fn disjoint_lists_follow_the_quota_then_backfill() {
        // k=5, two lists: quota floor(4/2)=2 each, fifth slot to the best
        // remaining score anywhere (a3 at 0.7 beats b3 at 0.6).
        let lists = vec![
            vec![rp("a1", 0.9), rp("a2", 0.8), rp("a3", 0.7)],
            vec![rp("b1", 0.95), rp("b2", 0.85), rp("b3", 0.6)],
        ];
        let merged = merge_rankings(&lists, 5).unwrap();
        let order: Vec<&str> = merged.iter().map(|r| r.passage_id.as_str()).collect();
        assert_eq!(order, vec!["a1", "a2", "b1", "b2", "a3"]);
    }

    #[test]
    fn quota_skips_passages_the_other_list_already_placed() {
        // b's best passage is a1, already taken by list a, so b's quota
        // moves down its own ranking.
        let lists = vec![
            vec![rp("a1", 0.9), rp("a2", 0.8), rp("a3", 0.7)],
            vec![rp("a1", 0.99), rp("b1", 0.85), rp("b2", 0.8), rp("b3", 0.75)],
        ];
        let merged = merge_rankings(&lists, 5).unwrap();
        let order: Vec<&str> = merged.iter().map(|r| r.passage_id.as_str()).collect();
        // Quotas: [a1, a2] then [b1, b2]; backfill best remaining: a3 (0.7)
        // over b3 (0.75)? No - b3 scores higher, b3 wins the last slot.
        assert_eq!(order, vec!["a1", "a2", "b1", "b2", "b3"]);
    }

    #[test]
    fn backfill_prefers_max_score_across_lists() {
        // Passage x sits below quota depth in both lists with different
        // fused scores; the backfill must judge it by the higher one.
        let lists = vec![
            vec![rp("a1", 0.9), rp("a2", 0.8), rp("x", 0.2)],
            vec![rp("b1", 0.85), rp("b2", 0.8), rp("x", 0.75), rp("b3", 0.1)],
        ];
        let merged = merge_rankings(&lists, 5).unwrap();
        let order: Vec<&str> = merged.iter().map(|r| r.passage_id.as_str()).collect();
        // Quotas (floor(4/2)=2): [a1, a2] and [b1, b2]; one backfill slot.
        // x at max(0.2, 0.75) = 0.75 beats b3 at 0.1.
        assert_eq!(order, vec!["a1", "a2", "b1", "b2", "x"]);
        let x = merged.iter().find(|r| r.passage_id == "x").unwrap();
        assert_eq!(x.s_fused, 0.75);
    }

    #[test]
    fn merge_returns_fewer_than_k_only_when_the_union_runs_out() {
        let lists = vec![
            vec![rp("a1", 0.9), rp("x", 0.2)],
            vec![rp("b1", 0.8), rp("x", 0.75)],
        ];
        let merged = merge_rankings(&lists, 5).unwrap();
        assert_eq!(merged.len(), 3); // union is {a1, b1, x}
    }

    #[test]
    fn three_lists_share_the_quota() {
        // k=7, m=3: quota floor(6/3)=2 each, one backfill slot.
        let lists = vec![
            vec![rp("a1", 0.9), rp("a2", 0.8), rp("a3", 0.1)],
            vec![rp("b1", 0.7), rp("b2", 0.6), rp("b3", 0.55)],
            vec![rp("c1", 0.5), rp("c2", 0.4), rp("c3", 0.3)],
        ];
        let merged = merge_rankings(&lists, 7).unwrap();
        let order: Vec<&str> = merged.iter().map(|r| r.passage_id.as_str()).collect();
        assert_eq!(order, vec!["a1", "a2", "b1", "b2", "c1", "c2", "b3"]);
    }

    #[test]
    fn merge_never_duplicates_and_never_overflows() {
        let lists = vec![
            vec![rp("a", 0.9), rp("b", 0.8)],
            vec![rp("a", 0.85), rp("b", 0.7)],
        ];
        let merged = merge_rankings(&lists, 5).unwrap();
        let mut ids: Vec<&str> = merged.iter().map(|r| r.passage_id.as_str()).collect();
        assert_eq!(ids.len(), 2); // union is only {a, b}
        ids.dedup();
        assert_eq!(ids.len(), 2);
    }

    #[test]
    fn small_k_with_many_lists_still_fills_all_slots() {
        // k=2, m=3: quota floor(1/3)=0, everything comes from backfill.
        let lists = vec![
            vec![rp("a", 0.3)],
            vec![rp("b", 0.9)],
            vec![rp("c", 0.6)],
        ];
        let merged = merge_rankings(&lists, 2).unwrap();
        let order: Vec<&str> = merged.iter().map(|r| r.passage_id.as_str()).collect();
        assert_eq!(order, vec!["b", "c"]);
    }

    #[test]
    fn merge_rejects_degenerate_calls() {
        assert!(merge_rankings::<f64>(&[], 5).is_err());
        assert!(merge_rankings(&[vec![rp("a", 1.0)]], 0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn score_table() -> impl Strategy<Value = Vec<(String, f64, f64)>> {
            prop::collection::btree_map(0usize..40, (0u8..=10, 0u8..=10), 2..25).prop_map(|m| {
                m.into_iter()
                    .map(|(i, (d, s))| {
                        (format!("p{i:02}"), f64::from(d) / 10.0, f64::from(s) / 10.0)
                    })
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn raising_both_channels_never_lowers_the_fused_score(
                table in score_table(), eps in 0.0f64..=1.0
            ) {
                let diff: BTreeMap<String, f64> =
                    table.iter().map(|(id, d, _)| (id.clone(), *d)).collect();
                let sim: BTreeMap<String, f64> =
                    table.iter().map(|(id, _, s)| (id.clone(), *s)).collect();
                let ranked = rank_candidates(&diff, &sim, eps, 1e-8).unwrap();
                let by_id: BTreeMap<&str, &RankedPassage<f64>> =
                    ranked.iter().map(|r| (r.passage_id.as_str(), r)).collect();
                for a in &ranked {
                    for b in &ranked {
                        if a.s_diff >= b.s_diff && a.s_sim >= b.s_sim {
                            prop_assert!(
                                by_id[a.passage_id.as_str()].s_fused
                                    >= by_id[b.passage_id.as_str()].s_fused - 1e-12
                            );
                        }
                    }
                }
            }

            #[test]
            fn affine_rescaling_of_raw_scores_barely_moves_fused_scores(
                table in score_table(), eps in 0.0f64..=1.0,
                scale in 0.5f64..10.0, shift in -5.0f64..5.0
            ) {
                // Min-max absorbs positive affine maps up to the delta
                // guard, so fused scores agree to high precision (exact
                // order can legitimately flip inside that band).
                let diff: BTreeMap<String, f64> =
                    table.iter().map(|(id, d, _)| (id.clone(), *d)).collect();
                let sim: BTreeMap<String, f64> =
                    table.iter().map(|(id, _, s)| (id.clone(), *s)).collect();
                let diff2: BTreeMap<String, f64> =
                    diff.iter().map(|(k, v)| (k.clone(), v * scale + shift)).collect();
                let r1 = rank_candidates(&diff, &sim, eps, 1e-12).unwrap();
                let r2 = rank_candidates(&diff2, &sim, eps, 1e-12).unwrap();
                let by_id2: BTreeMap<&str, f64> =
                    r2.iter().map(|r| (r.passage_id.as_str(), r.s_fused)).collect();
                for r in &r1 {
                    let other = by_id2[r.passage_id.as_str()];
                    prop_assert!(
                        (r.s_fused - other).abs() < 1e-6,
                        "{}: {} vs {}", r.passage_id, r.s_fused, other
                    );
                }
            }

            #[test]
            fn merge_output_is_duplicate_free_and_bounded(
                k in 1usize..10,
                lists in prop::collection::vec(
                    prop::collection::vec((0usize..15, 0u8..=100), 1..8), 1..4
                )
            ) {
                let rankings: Vec<Vec<RankedPassage<f64>>> = lists
                    .into_iter()
                    .map(|l| {
                        let mut seen = BTreeSet::new();
                        let mut v: Vec<RankedPassage<f64>> = l
                            .into_iter()
                            .filter(|(id, _)| seen.insert(*id))
                            .map(|(id, s)| rp(&format!("p{id:02}"), f64::from(s) / 100.0))
                            .collect();
                        v.sort_by(|a, b| b.s_fused.partial_cmp(&a.s_fused).unwrap()
                            .then_with(|| a.passage_id.cmp(&b.passage_id)));
                        v
                    })
                    .collect();
                let union: BTreeSet<&str> = rankings
                    .iter()
                    .flatten()
                    .map(|r| r.passage_id.as_str())
                    .collect();
                let merged = merge_rankings(&rankings, k).unwrap();
                prop_assert!(merged.len() <= k);
                prop_assert_eq!(merged.len(), k.min(union.len()));
                let distinct: BTreeSet<&str> =
                    merged.iter().map(|r| r.passage_id.as_str()).collect();
                prop_assert_eq!(distinct.len(), merged.len());
            }
        }
    }
}
