//! Property tests for the engine's invariants.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use token_shapley::corpus::{build_datastore, build_records, tokenize, Datastore, DatastoreEntry};
use token_shapley::embedding::{hash_embed, EmbeddingEntry, EmbeddingFile, EmbeddingProvider, HashProvider};
use token_shapley::eval::{gen_kv, metric_pr_at_k};
use token_shapley::pipeline::{accumulate, attribute_response, AttributionParams, AttributionQuery};
use token_shapley::retrieval::{query_top_m, rbf_weight};
use token_shapley::shapley::{shapley_bruteforce, shapley_dp, shapley_k1, utility, DiscreteGame};
use token_shapley::{BigRational, ExactGame, Game64, Player};

/// Players in rank order: strictly decreasing weights in (0, 1].
fn game_strategy(max_n: usize) -> impl Strategy<Value = Game64> {
    prop::collection::vec((1u32..1_000_000, any::<bool>()), 1..=max_n).prop_map(|raw| {
        let mut raw = raw;
        raw.sort_by_key(|p| std::cmp::Reverse(p.0));
        raw.dedup_by_key(|p| p.0);
        let players = raw.into_iter().map(|(w, m)| Player::new(f64::from(w) / 1e6, m)).collect();
        Game64::new(players).unwrap()
    })
}

fn gain(game: &Game64, k: usize) -> f64 {
    f64::from(utility(game, &(0..game.len()).collect::<Vec<_>>(), k)) - 1.0
}

fn sign_ok(game: &Game64, values: &[f64]) -> bool {
    game.players().iter().zip(values).all(|(p, &v)| if p.label_match { v >= -1e-12 } else { v <= 1e-12 })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn k1_matches_bruteforce(game in game_strategy(12)) {
        let fast = shapley_k1(&game);
        let slow = shapley_bruteforce(&game, 1).unwrap();
        for (a, b) in fast.values.iter().zip(&slow.values) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn k1_exact_in_rationals(labels in prop::collection::vec(any::<bool>(), 1..=10)) {
        let game = ExactGame::from_labels(&labels);
        prop_assert_eq!(shapley_k1(&game).values, shapley_bruteforce(&game, 1).unwrap().values);
    }

    #[test]
    fn dp_matches_bruteforce_on_discretized_weights(game in game_strategy(11), k in 1usize..=3, bits in 4u32..=12) {
        let discrete = DiscreteGame::from_game(&game, bits).unwrap().to_game::<f64>();
        let fast = shapley_dp(&discrete, k, bits).unwrap();
        let slow = shapley_bruteforce(&discrete, k).unwrap();
        for (a, b) in fast.values.iter().zip(&slow.values) {
            prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn efficiency_sign_and_bound(game in game_strategy(12), k in 1usize..=3) {
        let discrete = DiscreteGame::from_game(&game, 10).unwrap().to_game::<f64>();
        let mut runs = vec![(game.clone(), shapley_bruteforce(&game, k).unwrap().values)];
        runs.push((discrete.clone(), shapley_dp(&discrete, k, 10).unwrap().values));
        if k == 1 {
            runs.push((game.clone(), shapley_k1(&game).values));
        }
        for (g, values) in runs {
            let total: f64 = values.iter().sum();
            prop_assert!((total - gain(&g, k)).abs() <= 1e-9);
            prop_assert!(sign_ok(&g, &values));
            prop_assert!(values.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn identical_neighbours_are_symmetric(game in game_strategy(8), at in 0usize..8, copies in 1usize..=3, k in 1usize..=3) {
        let mut players = game.players().to_vec();
        let at = at % players.len();
        let twin = players[at].clone();
        for _ in 0..copies {
            players.insert(at, twin.clone());
        }
        let g = Game64::new(players).unwrap();
        for values in [shapley_bruteforce(&g, k).unwrap().values, shapley_dp(&g, k, 10).unwrap().values] {
            for i in at..=at + copies {
                prop_assert!((values[i] - values[at]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn last_matching_player_in_all_match_game_is_null(n in 1usize..=12, k in 1usize..=3) {
        let g = Game64::from_labels(&vec![true; n]);
        prop_assert_eq!(shapley_dp(&g, k, 10).unwrap().values[n - 1], 0.0);
        prop_assert_eq!(shapley_k1(&g).values[n - 1], 0.0);
    }

    #[test]
    fn rbf_weight_strictly_decreasing(a in 0.0f64..4.0, b in 0.0f64..4.0, gamma in 0.01f64..10.0) {
        prop_assume!(a < b);
        prop_assert!(rbf_weight(a, gamma) > rbf_weight(b, gamma));
    }

    #[test]
    fn rank_order_and_k1_values_ignore_gamma(text in "[a-c ]{1,40}", q in "[a-c ]{0,12}", m in 1usize..12) {
        let provider = HashProvider::new(32).unwrap();
        let seq = tokenize(&text);
        prop_assume!(!seq.is_empty());
        let store = build_datastore(&build_records(&seq), &provider).unwrap();
        let query = provider.embed(&q).unwrap();
        let a = query_top_m(&store, &query, m, 0.1, "a").unwrap();
        let b = query_top_m(&store, &query, m, 10.0, "a").unwrap();
        let order = |c: &token_shapley::retrieval::CandidateSet| c.candidates.iter().map(|x| x.position).collect::<Vec<_>>();
        prop_assert_eq!(order(&a), order(&b));
        let bits = |c: &token_shapley::retrieval::CandidateSet| {
            shapley_k1(&c.game::<f64>()).values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        prop_assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn datastore_bytes_round_trip(
        dim in 1usize..10,
        rows in prop::collection::vec((prop::collection::vec(any::<f32>(), 10), "\\PC{0,8}", 0usize..1000), 0..20),
        id in "\\PC{0,12}",
    ) {
        let keys: Vec<f32> = rows.iter().flat_map(|r| r.0[..dim].to_vec()).collect();
        let entries = rows.iter().enumerate()
            .map(|(i, r)| DatastoreEntry { value_token: r.1.clone(), position: i, sentence_id: r.2 })
            .collect();
        let store = Datastore::new(dim, keys, entries, id, false, BTreeMap::new()).unwrap();
        let bytes = store.to_bytes().unwrap();
        let back = Datastore::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        let bits = |s: &Datastore| s.keys().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&store));
    }

    #[test]
    fn embedding_file_bytes_round_trip(
        dim in 1usize..8,
        texts in prop::collection::btree_set("\\PC{0,10}", 0..15),
        seed_values in prop::collection::vec(any::<f32>(), 8),
    ) {
        let entries = texts.iter().map(|t| EmbeddingEntry::new(t.clone(), seed_values[..dim].to_vec())).collect();
        let file = EmbeddingFile { dim, entries };
        let bytes = file.to_bytes().unwrap();
        prop_assert_eq!(EmbeddingFile::from_bytes(&bytes).unwrap().to_bytes().unwrap(), bytes);
    }

    #[test]
    fn hash_embed_unit_or_zero_and_batch_permutes(texts in prop::collection::vec("\\PC{0,12}", 1..8), rot in 0usize..8) {
        let provider = HashProvider::new(64).unwrap();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let out = provider.embed_batch(&refs).unwrap();
        for (t, v) in texts.iter().zip(&out) {
            let norm: f64 = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() <= 1e-6);
            prop_assert_eq!(v, &hash_embed(t, 64));
        }
        let mut rotated = refs.clone();
        rotated.rotate_left(rot % refs.len());
        let mut expected = out.clone();
        expected.rotate_left(rot % refs.len());
        prop_assert_eq!(provider.embed_batch(&rotated).unwrap(), expected);
    }

    #[test]
    fn one_store_entry_per_context_token(text in "[a-z .,!?:\\n]{0,80}") {
        let seq = tokenize(&text);
        let records = build_records(&seq);
        prop_assert_eq!(&records, &build_records(&seq));
        let store = build_datastore(&records, &HashProvider::new(16).unwrap()).unwrap();
        prop_assert_eq!(store.len(), seq.len());
    }

    #[test]
    fn accumulate_is_additive_over_disjoint_spans(seed in 0u64..500, cut in 0usize..200) {
        let ex = gen_kv(6, seed).unwrap();
        let context = tokenize(&ex.context.text());
        let provider = HashProvider::new(64).unwrap();
        let store = build_datastore(&build_records(&context), &provider).unwrap();
        let n = context.len();
        let aq = AttributionQuery::new(ex.query.clone(), context, tokenize("x y z"));
        let matrix = attribute_response(&store, &provider, &aq, &AttributionParams { k: 2, m: 5, ..Default::default() }).unwrap();
        let cut = cut % (n + 1);
        let targets: BTreeSet<usize> = matrix.targets().iter().copied().collect();
        let left: BTreeSet<usize> = (0..cut).collect();
        let right: BTreeSet<usize> = (cut..n).collect();
        let all: BTreeSet<usize> = (0..n).collect();
        let whole = accumulate(&matrix, &all, &targets);
        let parts = accumulate(&matrix, &left, &targets) + accumulate(&matrix, &right, &targets);
        prop_assert!((whole - parts).abs() <= 1e-12);
    }

    #[test]
    fn precision_and_recall_count_matches(
        predicted in prop::collection::btree_set(0usize..20, 0..6),
        gold in prop::collection::btree_set(0usize..20, 1..6),
        extra in 0usize..4,
    ) {
        let predicted: Vec<usize> = predicted.into_iter().collect();
        let k = predicted.len().max(1) + extra;
        let m = metric_pr_at_k(&predicted, &gold, k).unwrap();
        let p_count = m.precision * k as f64;
        let r_count = m.recall * gold.len() as f64;
        prop_assert!((p_count - p_count.round()).abs() < 1e-9);
        prop_assert!((r_count - r_count.round()).abs() < 1e-9);
        if m.precision + m.recall > 0.0 {
            prop_assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-12);
        } else {
            prop_assert_eq!(m.f1, 0.0);
        }
    }

    #[test]
    fn gen_kv_is_deterministic_and_distinct(seed in any::<u64>(), n in 2usize..40) {
        let a = gen_kv(n, seed).unwrap();
        prop_assert_eq!(&a, &gen_kv(n, seed).unwrap());
        let text = a.context.text();
        let words: Vec<&str> = text.lines().flat_map(|l| l.split(": ")).collect();
        prop_assert_eq!(words.len(), 2 * n);
        prop_assert_eq!(words.iter().collect::<BTreeSet<_>>().len(), 2 * n);
        prop_assert!(words.iter().all(|w| w.len() == 16 && w.bytes().all(|b| b.is_ascii_hexdigit())));
    }
}

#[test]
fn exact_rational_golden_through_dp() {
    let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
    let game = ExactGame::new(vec![Player::new(r(1, 1), true), Player::new(r(1, 2), false), Player::new(r(1, 4), true)]).unwrap();
    assert_eq!(shapley_dp(&game, 1, 10).unwrap().values, vec![r(1, 2), r(-1, 2), r(0, 1)]);
}
