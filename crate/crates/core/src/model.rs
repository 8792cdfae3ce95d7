//! The autoregressive model contract, chain-rule scoring and sampling.

use std::fmt::Debug;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::vocab::{TokenId, Vocab, EOS};

/// A distribution over sequences factored by the chain rule.
///
/// All probabilities are natural-log values with `f64::NEG_INFINITY` for zero
/// mass. Models are immutable; states are plain values owned by whichever
/// search is holding them.
///
/// Besides stepping, a model exposes a per-position *delta*: the part of a
/// state contributed by its newest token. [`AutoregressiveModel::rebuild`]
/// reassembles a full state from an ancestor's state plus the deltas recorded
/// below it, without re-running the model. Exact search uses this to keep only
/// one delta per node on long greedy paths.
pub trait AutoregressiveModel: Send + Sync {
    type State: Clone + Eq + Hash + Debug + Send + Sync;
    type Delta: Clone + Debug + Send + Sync;

    fn vocab(&self) -> &Vocab;

    /// Depth at which `</s>` has probability one. Every complete sequence has
    /// at most this many tokens.
    fn max_len(&self) -> usize;

    fn initial_state(&self) -> Self::State;

    /// Advances `state` by `token`. Consumes the state, the way a key/value
    /// cache is extended in place.
    fn step(&self, state: Self::State, token: TokenId) -> Self::State;

    /// Next-token log-probabilities, indexed by token id (EOS at 0).
    fn log_probs(&self, state: &Self::State) -> Vec<f64>;

    /// The newest position's contribution to `state`.
    fn delta(&self, state: &Self::State) -> Self::Delta;

    /// Reassembles the state reached from `base` (or the initial state) by the
    /// positions whose deltas are listed root-first.
    fn rebuild(&self, base: Option<&Self::State>, deltas: &[&Self::Delta]) -> Self::State;

    /// Accounting size of a full state.
    fn state_bytes(&self, _state: &Self::State) -> usize {
        std::mem::size_of::<Self::State>()
    }

    /// Accounting size of one delta.
    fn delta_bytes(&self, _delta: &Self::Delta) -> usize {
        std::mem::size_of::<Self::Delta>()
    }
}

/// A token sequence with its accumulated model log-probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypothesis {
    /// Tokens, never including EOS.
    pub tokens: Vec<TokenId>,
    /// Σ ln P(x_i | x_<i), plus ln P(EOS | x) when complete.
    pub logprob: f64,
    pub complete: bool,
}

impl Hypothesis {
    pub fn empty() -> Self {
        Self {
            tokens: Vec::new(),
            logprob: 0.0,
            complete: false,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Chain-rule log-probability of `seq`; when `complete`, the final factor is
/// P(EOS | seq).
pub fn sequence_log_prob<M: AutoregressiveModel + ?Sized>(model: &M, seq: &[TokenId], complete: bool) -> Result<f64> {
    model.vocab().check_sequence(seq)?;
    let mut state = model.initial_state();
    let mut total = 0.0;
    for &tok in seq {
        let lp = model.log_probs(&state)[tok as usize];
        if lp == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        total += lp;
        state = model.step(state, tok);
    }
    if complete {
        total += model.log_probs(&state)[EOS as usize];
    }
    Ok(total)
}

/// Ancestral sample, deterministic in `seed`.
pub fn sample<M: AutoregressiveModel + ?Sized>(model: &M, seed: u64, max_len: usize) -> Hypothesis {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_from(model, model.initial_state(), &mut rng, max_len)
}

/// Ancestral sample starting at `state`. Stops after `max_len` tokens
/// (returning an incomplete hypothesis) if EOS has not been drawn.
pub fn sample_from<M, R>(model: &M, mut state: M::State, rng: &mut R, max_len: usize) -> Hypothesis
where
    M: AutoregressiveModel + ?Sized,
    R: Rng + ?Sized,
{
    let mut hyp = Hypothesis::empty();
    loop {
        let lps = model.log_probs(&state);
        let tok = draw(&lps, rng);
        hyp.logprob += lps[tok as usize];
        if tok == EOS {
            hyp.complete = true;
            return hyp;
        }
        if hyp.tokens.len() == max_len {
            hyp.logprob -= lps[tok as usize];
            return hyp;
        }
        hyp.tokens.push(tok);
        state = model.step(state, tok);
    }
}

/// Draws an index from a log-probability vector.
pub(crate) fn draw<R: Rng + ?Sized>(log_probs: &[f64], rng: &mut R) -> TokenId {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &lp) in log_probs.iter().enumerate() {
        if lp == f64::NEG_INFINITY {
            continue;
        }
        acc += lp.exp();
        last = i;
        if u < acc {
            return i as TokenId;
        }
    }
    // rounding left u just above the cumulative total
    last as TokenId
}

/// Token ids ordered by descending log-probability, ties by id. Zero-mass
/// tokens are dropped.
pub fn ranked_tokens(log_probs: &[f64]) -> Vec<TokenId> {
    let mut ids: Vec<TokenId> = (0..log_probs.len() as TokenId)
        .filter(|&t| log_probs[t as usize] > f64::NEG_INFINITY)
        .collect();
    ids.sort_by(|&a, &b| log_probs[b as usize].total_cmp(&log_probs[a as usize]).then(a.cmp(&b)));
    ids
}

/// A model continued from a fixed prompt. Hypotheses over this model contain
/// only the continuation, and their scores only the continuation's factors.
#[derive(Debug, Clone)]
pub struct Prompted<'a, M: AutoregressiveModel> {
    inner: &'a M,
    prompt: Vec<TokenId>,
    start: M::State,
}

impl<'a, M: AutoregressiveModel> Prompted<'a, M> {
    pub fn new(inner: &'a M, prompt: Vec<TokenId>) -> Result<Self> {
        inner.vocab().check_sequence(&prompt)?;
        let start = prompt.iter().fold(inner.initial_state(), |s, &t| inner.step(s, t));
        Ok(Self { inner, prompt, start })
    }

    pub fn prompt(&self) -> &[TokenId] {
        &self.prompt
    }
}

impl<M: AutoregressiveModel> AutoregressiveModel for Prompted<'_, M> {
    type State = M::State;
    type Delta = M::Delta;

    fn vocab(&self) -> &Vocab {
        self.inner.vocab()
    }

    fn max_len(&self) -> usize {
        self.inner.max_len().saturating_sub(self.prompt.len())
    }

    fn initial_state(&self) -> M::State {
        self.start.clone()
    }

    fn step(&self, state: M::State, token: TokenId) -> M::State {
        self.inner.step(state, token)
    }

    fn log_probs(&self, state: &M::State) -> Vec<f64> {
        self.inner.log_probs(state)
    }

    fn delta(&self, state: &M::State) -> M::Delta {
        self.inner.delta(state)
    }

    fn rebuild(&self, base: Option<&M::State>, deltas: &[&M::Delta]) -> M::State {
        self.inner.rebuild(Some(base.unwrap_or(&self.start)), deltas)
    }

    fn state_bytes(&self, state: &M::State) -> usize {
        self.inner.state_bytes(state)
    }

    fn delta_bytes(&self, delta: &M::Delta) -> usize {
        self.inner.delta_bytes(delta)
    }
}

/// Wraps a model so that its state also carries one cached vector per
/// position, the way a transformer key/value cache grows with the prefix.
/// The wrapped distribution is unchanged; only state size accounting and
/// rebuild cost become position-dependent.
#[derive(Debug, Clone)]
pub struct KvEmulation<M> {
    inner: M,
    width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KvState<S> {
    inner: S,
    cache: Vec<u64>,
}

impl<M> KvEmulation<M> {
    /// `width` is the number of `u64` values cached per position.
    pub fn new(inner: M, width: usize) -> Self {
        Self {
            inner,
            width: width.max(1),
        }
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

fn position_vector(prev: Option<&u64>, token: TokenId, width: usize) -> impl Iterator<Item = u64> {
    let seed = prev.copied().unwrap_or(0x9e37_79b9_7f4a_7c15) ^ u64::from(token);
    (0..width as u64).map(move |j| seed.rotate_left(7).wrapping_mul(0x2545_f491_4f6c_dd1d) ^ j)
}

impl<M: AutoregressiveModel> AutoregressiveModel for KvEmulation<M> {
    type State = KvState<M::State>;
    type Delta = (M::Delta, Vec<u64>);

    fn vocab(&self) -> &Vocab {
        self.inner.vocab()
    }

    fn max_len(&self) -> usize {
        self.inner.max_len()
    }

    fn initial_state(&self) -> Self::State {
        KvState {
            inner: self.inner.initial_state(),
            cache: Vec::new(),
        }
    }

    fn step(&self, mut state: Self::State, token: TokenId) -> Self::State {
        let fresh: Vec<u64> = position_vector(state.cache.last(), token, self.width).collect();
        state.cache.extend(fresh);
        KvState {
            inner: self.inner.step(state.inner, token),
            cache: state.cache,
        }
    }

    fn log_probs(&self, state: &Self::State) -> Vec<f64> {
        self.inner.log_probs(&state.inner)
    }

    fn delta(&self, state: &Self::State) -> Self::Delta {
        let tail = state.cache.len().saturating_sub(self.width);
        (self.inner.delta(&state.inner), state.cache[tail..].to_vec())
    }

    fn rebuild(&self, base: Option<&Self::State>, deltas: &[&Self::Delta]) -> Self::State {
        let inner_deltas: Vec<&M::Delta> = deltas.iter().map(|d| &d.0).collect();
        let inner = self.inner.rebuild(base.map(|b| &b.inner), &inner_deltas);
        let mut cache = base.map(|b| b.cache.clone()).unwrap_or_default();
        for d in deltas {
            cache.extend_from_slice(&d.1);
        }
        KvState { inner, cache }
    }

    fn state_bytes(&self, state: &Self::State) -> usize {
        self.inner.state_bytes(&state.inner) + 8 * state.cache.len()
    }

    fn delta_bytes(&self, delta: &Self::Delta) -> usize {
        self.inner.delta_bytes(&delta.0) + 8 * delta.1.len()
    }
}

/// ln Σ exp(x_i), with −∞ for an empty or all-zero input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
