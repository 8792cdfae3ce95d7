#![allow(dead_code)]

use mapsearch::prob::{self, Prob};
use mapsearch::synthetic::{random_distribution, ExplicitDistribution};
use mapsearch::TokenId;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn corpus(count: u64) -> Vec<ExplicitDistribution> {
    (0..count)
        .map(|seed| random_distribution(&mut ChaCha8Rng::seed_from_u64(seed), 4, 5, 8))
        .collect()
}

/// Highest exact probability among entries passing `keep`, and every
/// sequence attaining it in token order.
pub fn brute_argmax(
    dist: &ExplicitDistribution,
    keep: impl Fn(&[TokenId]) -> bool,
) -> Option<(Prob, Vec<Vec<TokenId>>)> {
    let best = dist
        .entries()
        .iter()
        .filter(|(s, _)| keep(s))
        .map(|(_, p)| p)
        .max()?
        .clone();
    let seqs = dist
        .entries()
        .iter()
        .filter(|(s, p)| keep(s) && **p == best)
        .map(|(s, _)| s.clone())
        .collect();
    Some((best, seqs))
}

pub fn ln(p: &Prob) -> f64 {
    prob::ln_prob(p)
}

/// Every token sequence over ids 1..vocab of length at most `max_len`.
pub fn all_sequences(vocab: usize, max_len: usize) -> Vec<Vec<TokenId>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for t in 1..vocab as TokenId {
                let mut c: Vec<TokenId> = s.clone();
                c.push(t);
                next.push(c);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}
