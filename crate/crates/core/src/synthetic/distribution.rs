use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::prob::{self, Prob};
use crate::vocab::{TokenId, Vocab};

/// Tolerance on the total mass of an explicit distribution.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A finite distribution over complete sequences with exact rational masses.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitDistribution {
    vocab: Vocab,
    entries: BTreeMap<Vec<TokenId>, Prob>,
}

impl ExplicitDistribution {
    /// Builds a distribution. Repeated sequences have their masses added.
    pub fn new<I>(vocab: Vocab, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<TokenId>, Prob)>,
    {
        let mut map: BTreeMap<Vec<TokenId>, Prob> = BTreeMap::new();
        for (seq, p) in entries {
            vocab.check_sequence(&seq)?;
            if !p.is_positive() {
                return Err(Error::InvalidProbability(prob::format_prob(&p)));
            }
            *map.entry(seq).or_insert_with(Prob::zero) += p;
        }
        if map.is_empty() {
            return Err(Error::ZeroSupport);
        }
        let total: Prob = map.values().sum();
        let err = prob::to_f64(&(total - Prob::one())).abs();
        if err > MASS_TOLERANCE {
            return Err(Error::NotNormalized(1.0 + err));
        }
        Ok(Self { vocab, entries: map })
    }

    /// Uniform over the given distinct sequences.
    pub fn uniform(vocab: Vocab, seqs: Vec<Vec<TokenId>>) -> Result<Self> {
        let n = seqs.len() as u64;
        if n == 0 {
            return Err(Error::ZeroSupport);
        }
        let each = prob::ratio(1, n);
        let before = seqs.len();
        let dist = Self::new(vocab, seqs.into_iter().map(|s| (s, each.clone())))?;
        if dist.len() != before {
            return Err(Error::InvalidConfig("uniform support has repeated sequences".into()));
        }
        Ok(dist)
    }

    /// Normalizes positive integer weights.
    pub fn from_weights(vocab: Vocab, weights: Vec<(Vec<TokenId>, u64)>) -> Result<Self> {
        let total: u64 = weights.iter().map(|(_, w)| *w).sum();
        if total == 0 {
            return Err(Error::ZeroSupport);
        }
        Self::new(vocab, weights.into_iter().map(|(s, w)| (s, prob::ratio(w, total))))
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn entries(&self) -> &BTreeMap<Vec<TokenId>, Prob> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn prob(&self, seq: &[TokenId]) -> Option<&Prob> {
        self.entries.get(seq)
    }

    pub fn max_len(&self) -> usize {
        self.entries.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn total_mass(&self) -> Prob {
        self.entries.values().sum()
    }

    /// Re-encodes the distribution into `vocab`, which must contain every
    /// token used here.
    pub fn reencode(&self, vocab: &Vocab) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|(seq, p)| {
                let ids = seq
                    .iter()
                    .map(|&t| {
                        let word = self.vocab.token(t).unwrap_or_default();
                        vocab.id(word).ok_or_else(|| Error::UnknownToken(word.into()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((ids, p.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(vocab.clone(), entries)
    }

    /// Entries keyed by their rendered text.
    pub fn rendered(&self) -> BTreeMap<String, Prob> {
        self.entries
            .iter()
            .map(|(s, p)| (self.vocab.render(s), p.clone()))
            .collect()
    }
}

/// A random distribution for oracle tests: vocabulary of at most
/// `max_vocab` tokens (EOS included), sequences of at most `max_len` tokens,
/// at most `max_support` entries with small integer weights (ties are common).
pub fn random_distribution<R: Rng + ?Sized>(
    rng: &mut R,
    max_vocab: usize,
    max_len: usize,
    max_support: usize,
) -> ExplicitDistribution {
    const WORDS: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];
    let vocab_size = rng.gen_range(2..=max_vocab.clamp(2, WORDS.len() + 1));
    let vocab = Vocab::new(WORDS[..vocab_size - 1].iter().copied()).expect("distinct words");
    let support = rng.gen_range(1..=max_support.max(1));
    let weights = (0..support)
        .map(|_| {
            let len = rng.gen_range(0..=max_len);
            let seq = (0..len).map(|_| rng.gen_range(1..vocab_size as TokenId)).collect();
            (seq, rng.gen_range(1..=12u64))
        })
        .collect();
    ExplicitDistribution::from_weights(vocab, weights).expect("positive weights")
}
