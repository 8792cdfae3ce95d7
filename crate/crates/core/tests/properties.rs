use mapsearch::model::{log_sum_exp, Prompted};
use mapsearch::ngram::NgramModel;
use mapsearch::predictor::{bucket_of, bucket_range, LENGTH_CLASSES};
use mapsearch::search::{global_mode_with, SearchOptions};
use mapsearch::synthetic::{random_distribution, TrieModel};
use mapsearch::{sequence_log_prob, AutoregressiveModel, TokenId};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Walks every reachable prefix up to `depth`, calling `f` with the prefix,
/// the stepped state and the delta path.
fn walk<M: AutoregressiveModel>(model: &M, depth: usize, f: &mut impl FnMut(&[TokenId], &M::State, &[M::Delta])) {
    fn go<M: AutoregressiveModel>(
        model: &M,
        depth: usize,
        prefix: &mut Vec<TokenId>,
        state: M::State,
        deltas: &mut Vec<M::Delta>,
        f: &mut impl FnMut(&[TokenId], &M::State, &[M::Delta]),
    ) {
        f(prefix, &state, deltas);
        if prefix.len() == depth {
            return;
        }
        let lps = model.log_probs(&state);
        for t in 1..lps.len() as TokenId {
            if lps[t as usize] == f64::NEG_INFINITY {
                continue;
            }
            let next = model.step(state.clone(), t);
            prefix.push(t);
            deltas.push(model.delta(&next));
            go(model, depth, prefix, next, deltas, f);
            deltas.pop();
            prefix.pop();
        }
    }
    go(model, depth, &mut vec![], model.initial_state(), &mut vec![], f);
}

fn check_model<M: AutoregressiveModel>(model: &M, depth: usize) {
    walk(model, depth, &mut |prefix, state, deltas| {
        let lps = model.log_probs(state);
        assert!((log_sum_exp(&lps).exp() - 1.0).abs() < 1e-9, "{prefix:?}");
        let replay = prefix.iter().fold(model.initial_state(), |s, &t| model.step(s, t));
        let refs: Vec<&M::Delta> = deltas.iter().collect();
        let rebuilt = model.rebuild(None, &refs);
        for other in [&replay, &rebuilt] {
            for (a, b) in lps.iter().zip(model.log_probs(other)) {
                assert!(a == &b || (a - b).abs() < 1e-12);
            }
        }
        // partial rebuild from an intermediate ancestor
        if prefix.len() >= 2 {
            let mid = prefix.len() / 2;
            let anchor = prefix[..mid]
                .iter()
                .fold(model.initial_state(), |s, &t| model.step(s, t));
            assert_eq!(model.rebuild(Some(&anchor), &refs[mid..]), rebuilt);
        }
    });
}

fn corpus_text(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = ["a", "b", "c", "d"];
    (0..rng.gen_range(1..12))
        .map(|_| {
            let n = rng.gen_range(0..5);
            let line: Vec<&str> = (0..n).map(|_| words[rng.gen_range(0..4)]).collect();
            line.join(" ") + "\n"
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trie_models_are_normalized_and_replayable(seed in any::<u64>()) {
        let dist = random_distribution(&mut ChaCha8Rng::seed_from_u64(seed), 4, 5, 8);
        let model = TrieModel::new(dist.clone());
        check_model(&model, model.max_len() + 1);
        for (seq, p) in dist.entries() {
            let lp = sequence_log_prob(&model, seq, true).unwrap();
            prop_assert!((lp - mapsearch::prob::ln_prob(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn ngram_models_are_normalized_and_replayable(
        seed in any::<u64>(),
        order in 1usize..4,
        alpha in prop_oneof![Just(0.0), 0.01f64..2.0],
    ) {
        let text = corpus_text(seed);
        let model = NgramModel::train_text(&text, order, alpha, 4, false);
        prop_assume!(model.is_ok());
        let model = model.unwrap();
        check_model(&model, 4);
        let prompted = Prompted::new(&model, vec![1]).unwrap();
        check_model(&prompted, 2);
    }

    #[test]
    fn pruning_is_sound(seed in any::<u64>()) {
        let dist = random_distribution(&mut ChaCha8Rng::seed_from_u64(seed), 5, 5, 12);
        let model = TrieModel::new(dist);
        let base = SearchOptions { tie_cap: 64, ..SearchOptions::default() };
        let pruned = global_mode_with(&model, &base);
        let full = global_mode_with(&model, &SearchOptions { prune: false, ..base });
        prop_assert_eq!(&pruned.argmax, &full.argmax);
        prop_assert!(pruned.stats.nodes_expanded <= full.stats.nodes_expanded);
    }

    #[test]
    fn buckets_are_monotone_and_consistent(r in 0usize..100_000) {
        let c = bucket_of(r);
        prop_assert!(c < LENGTH_CLASSES);
        prop_assert!(bucket_of(r + 1) >= c);
        let (lo, hi) = bucket_range(c);
        prop_assert!(lo <= r && hi.is_none_or(|h| r <= h));
    }
}

#[test]
fn bucket_table_is_surjective() {
    let table: Vec<usize> = (0..=200).map(bucket_of).collect();
    for c in 0..LENGTH_CLASSES {
        assert!(table.contains(&c), "class {c}");
    }
}
