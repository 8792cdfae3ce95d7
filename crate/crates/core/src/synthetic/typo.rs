use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::prob::{self, Prob};
use crate::synthetic::distribution::ExplicitDistribution;
use crate::vocab::{TokenId, Vocab};

/// `k` distinct misspellings per word, rendered `word~1 … word~k`.
pub fn numbered_variants<'a, I>(words: I, k: usize) -> BTreeMap<String, Vec<String>>
where
    I: IntoIterator<Item = &'a str>,
{
    words
        .into_iter()
        .map(|w| (w.to_string(), (1..=k).map(|i| format!("{w}~{i}")).collect()))
        .collect()
}

/// Corrupts each word of every clean sequence independently: kept with
/// probability 1−p, otherwise replaced by one of its variants chosen uniformly.
/// The output enumerates every corruption pattern; its vocabulary is the clean
/// vocabulary followed by the variants in sorted order.
pub fn typo_channel(
    clean: &ExplicitDistribution,
    error_prob: &Prob,
    variants: &BTreeMap<String, Vec<String>>,
) -> Result<ExplicitDistribution> {
    if !prob::is_probability(error_prob) || error_prob.is_one() {
        return Err(Error::InvalidProbability(prob::format_prob(error_prob)));
    }
    let src = clean.vocab();
    let used: BTreeSet<TokenId> = clean.entries().keys().flatten().copied().collect();
    for &id in &used {
        let word = src.token(id).unwrap_or_default();
        let vs = variants
            .get(word)
            .filter(|vs| !vs.is_empty())
            .ok_or_else(|| Error::EmptyVariantSet(word.to_string()))?;
        if let Some(v) = vs.iter().find(|v| v.as_str() == word) {
            return Err(Error::VariantEqualsWord(v.clone()));
        }
    }

    let extra: BTreeSet<&str> = used
        .iter()
        .flat_map(|&id| variants[src.token(id).unwrap_or_default()].iter())
        .map(String::as_str)
        .filter(|v| src.id(v).is_none())
        .collect();
    let vocab = Vocab::new(src.tokens()[1..].iter().map(String::as_str).chain(extra))?;

    // per clean token: (replacement id, probability) options
    let keep = Prob::one() - error_prob;
    let options: BTreeMap<TokenId, Vec<(TokenId, Prob)>> = used
        .iter()
        .map(|&id| {
            let word = src.token(id).unwrap_or_default();
            let vs = &variants[word];
            let each = error_prob / Prob::from_integer(vs.len().into());
            let mut opts = vec![(vocab.id(word).unwrap_or_default(), keep.clone())];
            opts.extend(vs.iter().map(|v| (vocab.id(v).unwrap_or_default(), each.clone())));
            opts.retain(|(_, p)| !p.is_zero());
            (id, opts)
        })
        .collect();

    let mut out: Vec<(Vec<TokenId>, Prob)> = Vec::new();
    for (seq, p) in clean.entries() {
        let mut partial: Vec<(Vec<TokenId>, Prob)> = vec![(Vec::with_capacity(seq.len()), p.clone())];
        for tok in seq {
            partial = partial
                .into_iter()
                .flat_map(|(prefix, mass)| {
                    options[tok].iter().map(move |(rep, q)| {
                        let mut next = prefix.clone();
                        next.push(*rep);
                        (next, &mass * q)
                    })
                })
                .collect();
        }
        out.extend(partial);
    }
    ExplicitDistribution::new(vocab, out)
}

/// Number of tokens in `seq` that are misspellings listed in `variants`.
pub fn count_typos(vocab: &Vocab, seq: &[TokenId], variants: &BTreeMap<String, Vec<String>>) -> usize {
    let typos: BTreeSet<&str> = variants.values().flatten().map(String::as_str).collect();
    seq.iter()
        .filter(|&&t| vocab.token(t).is_some_and(|w| typos.contains(w)))
        .count()
}
