//! Exact nearest-neighbor retrieval over a [`Datastore`] and the signed
//! candidate set that feeds the Shapley game.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::corpus::Datastore;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::shapley::{Game, Player};

pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_M: usize = 10;

/// Squared distance assigned to all-zero keys in a normalized store: the
/// largest squared distance between two unit vectors. Keeps context-free
/// (empty-prefix) entries behind every real neighbor.
pub const INERT_SQ_DIST: f64 = 4.0;

pub fn squared_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum())
}

/// `exp(-gamma * sq_dist)`, floored at the smallest positive normal so the
/// weight never reaches zero.
pub fn rbf_weight(sq_dist: f64, gamma: f64) -> f64 {
    (-gamma * sq_dist).exp().max(f64::MIN_POSITIVE)
}

pub fn rbf_similarity(a: &[f32], b: &[f32], gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(rbf_weight(squared_distance(a, b)?, gamma))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must be positive and finite, got {gamma}")));
    }
    Ok(())
}

/// Token equality used for label matching: trimmed, case-sensitive.
pub fn tokens_match(a: &str, b: &str) -> bool {
    a.trim() == b.trim()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub entry_index: usize,
    pub position: usize,
    /// 1-based.
    pub rank: usize,
    pub sq_dist: f64,
    pub weight: f64,
    pub label_match: bool,
    pub signed_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub target_token: String,
    pub query_vector: Vec<f32>,
    pub gamma: f64,
    pub candidates: Vec<Candidate>,
    pub n_total: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// The Shapley game over these candidates, in rank order.
    pub fn game<T: Scalar>(&self) -> Game<T> {
        let players = self
            .candidates
            .iter()
            .map(|c| Player::new(T::from_f64(c.weight).expect("finite weight"), c.label_match))
            .collect();
        Game::new(players).expect("weights are positive and non-increasing by construction")
    }
}

fn effective_sq_dist(store: &Datastore, index: usize, query: &[f32]) -> f64 {
    let key = store.key(index);
    if store.normalized() && key.iter().all(|&x| x == 0.0) {
        return INERT_SQ_DIST;
    }
    // lengths were checked by the caller
    squared_distance(key, query).unwrap()
}

/// Exhaustive top-`m` search by squared L2 distance, ties broken by context
/// position.
pub fn query_top_m(store: &Datastore, query: &[f32], m: usize, gamma: f64, target_token: &str) -> Result<CandidateSet> {
    check_gamma(gamma)?;
    if m == 0 {
        return Err(Error::InvalidArgument("M must be positive".into()));
    }
    if query.len() != store.dim() {
        return Err(Error::DimensionMismatch { expected: store.dim(), got: query.len() });
    }
    let mut scored: Vec<(f64, usize, usize)> = (0..store.len())
        .map(|i| (effective_sq_dist(store, i, query), store.entry(i).position, i))
        .collect();
    let order = |a: &(f64, usize, usize), b: &(f64, usize, usize)| -> Ordering {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    };
    let keep = m.min(scored.len());
    if keep < scored.len() {
        scored.select_nth_unstable_by(keep, order);
        scored.truncate(keep);
    }
    scored.sort_unstable_by(order);

    let candidates = scored
        .into_iter()
        .enumerate()
        .map(|(r, (sq_dist, position, entry_index))| {
            let weight = rbf_weight(sq_dist, gamma);
            let label_match = tokens_match(&store.entry(entry_index).value_token, target_token);
            Candidate {
                entry_index,
                position,
                rank: r + 1,
                sq_dist,
                weight,
                label_match,
                signed_weight: if label_match { weight } else { -weight },
            }
        })
        .collect();
    Ok(CandidateSet {
        target_token: target_token.to_owned(),
        query_vector: query.to_vec(),
        gamma,
        candidates,
        n_total: store.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_datastore, build_records, tokenize, DatastoreEntry};
    use crate::embedding::{hash_embed, HashProvider};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn store(points: &[[f32; 2]], tokens: &[&str]) -> Datastore {
        let keys = points.iter().flatten().copied().collect();
        let entries = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| DatastoreEntry { value_token: (*t).into(), position: i, sentence_id: 0 })
            .collect();
        Datastore::new(2, keys, entries, "test", false, BTreeMap::new()).unwrap()
    }

    #[test]
    fn rbf_values() {
        assert_eq!(rbf_similarity(&[0.3, 0.4], &[0.3, 0.4], 1.0).unwrap(), 1.0);
        let v = rbf_similarity(&[1.0, 0.0], &[0.0, 1.0], 0.5).unwrap();
        assert!((v - 0.367_879_441_171_442_3).abs() < 1e-12);
        let v = rbf_similarity(&[0.5], &[0.0], 1.0).unwrap();
        assert!((v - 0.778_800_783_071_404_9).abs() < 1e-12);
        assert!(matches!(rbf_similarity(&[1.0], &[1.0, 2.0], 1.0), Err(Error::DimensionMismatch { .. })));
        assert!(rbf_similarity(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn clamps_to_store_size() {
        let s = store(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], &["a", "b", "c"]);
        let c = query_top_m(&s, &[0.0, 0.0], 10, 1.0, "b").unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.n_total, 3);
        assert_eq!(c.candidates.iter().map(|c| c.rank).collect::<Vec<_>>(), [1, 2, 3]);
        assert!(c.candidates[1].label_match);
        assert!(c.candidates[0].signed_weight < 0.0);
    }

    #[test]
    fn ties_prefer_smaller_position() {
        let s = store(&[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], &["x", "y", "z"]);
        let c = query_top_m(&s, &[0.0, 0.0], 2, 1.0, "z").unwrap();
        assert_eq!(c.candidates[0].position, 0);
        assert_eq!(c.candidates[1].position, 1);
    }

    #[test]
    fn label_match_trims_but_keeps_case() {
        assert!(tokens_match(" Brady", "Brady "));
        assert!(!tokens_match("brady", "Brady"));
    }

    #[test]
    fn exact_prefix_match_ranks_first() {
        let records = build_records(&tokenize("k1: v1\nk2: v2"));
        let s = build_datastore(&records, &HashProvider::new(256).unwrap()).unwrap();
        let c = query_top_m(&s, &hash_embed("k2:", 256), 10, 1.0, "v2").unwrap();
        assert_eq!(c.candidates[0].position, 3);
        assert_eq!(c.candidates[0].sq_dist, 0.0);
        assert_eq!(c.candidates[0].weight, 1.0);
        assert!(c.candidates[0].label_match);
    }

    #[test]
    fn zero_keys_rank_last_in_normalized_store() {
        let keys = vec![0.0, 0.0, 0.6, 0.8, 1.0, 0.0];
        let entries = (0..3).map(|i| DatastoreEntry { value_token: "t".into(), position: i, sentence_id: 0 }).collect();
        let s = Datastore::new(2, keys, entries, "test", true, BTreeMap::new()).unwrap();
        let c = query_top_m(&s, &[0.0, -1.0], 3, 1.0, "t").unwrap();
        assert_eq!(c.candidates.last().unwrap().position, 0);
        assert_eq!(c.candidates.last().unwrap().sq_dist, INERT_SQ_DIST);
    }

    proptest! {
        #[test]
        fn matches_naive_sort(
            pts in prop::collection::vec((-3i8..3, -3i8..3), 1..60),
            q in (-3i8..3, -3i8..3),
            m in 1usize..20,
            gamma in 0.01f64..10.0,
        ) {
            let points: Vec<[f32; 2]> = pts.iter().map(|&(a, b)| [f32::from(a), f32::from(b)]).collect();
            let tokens: Vec<&str> = (0..points.len()).map(|i| if i % 3 == 0 { "a" } else { "b" }).collect();
            let s = store(&points, &tokens);
            let query = [f32::from(q.0), f32::from(q.1)];
            let got = query_top_m(&s, &query, m, gamma, "a").unwrap();
            let mut naive: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .map(|(i, p)| (squared_distance(p, &query).unwrap(), i))
                .collect();
            naive.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            naive.truncate(m);
            prop_assert_eq!(got.candidates.iter().map(|c| c.position).collect::<Vec<_>>(),
                            naive.iter().map(|x| x.1).collect::<Vec<_>>());
            for w in got.candidates.windows(2) {
                prop_assert!(w[0].sq_dist <= w[1].sq_dist);
                prop_assert!(w[0].weight >= w[1].weight);
            }
            // rank order does not depend on gamma
            let other = query_top_m(&s, &query, m, gamma * 7.0, "a").unwrap();
            prop_assert_eq!(got.candidates.iter().map(|c| c.entry_index).collect::<Vec<_>>(),
                            other.candidates.iter().map(|c| c.entry_index).collect::<Vec<_>>());
        }
    }
}
