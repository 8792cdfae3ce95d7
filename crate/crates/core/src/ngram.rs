//! Add-α smoothed n-gram language model with a hard length cap.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AutoregressiveModel;
use crate::vocab::{TokenId, Vocab, EOS, EOS_TOKEN};

/// Context padding before the first token.
pub const BOS_TOKEN: &str = "<s>";
const BOS: TokenId = TokenId::MAX;

pub const DEFAULT_MAX_LEN: usize = 64;

/// Stand-in for a space when a corpus is split into characters.
pub const SPACE_TOKEN: &str = "\u{2581}";

#[derive(Debug, Clone, PartialEq, Eq)]
struct ContextCounts {
    counts: Vec<u64>,
    total: u64,
}

/// The last `order − 1` tokens (BOS-padded) and the number of tokens so far.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NgramState {
    context: Vec<TokenId>,
    depth: u32,
}

impl NgramState {
    pub fn depth(&self) -> usize {
        self.depth as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    vocab: Vocab,
    alpha: f64,
    max_len: usize,
    counts: BTreeMap<Vec<TokenId>, ContextCounts>,
}

impl NgramModel {
    /// Counts every n-gram of each padded training sequence, including an EOS
    /// event at its end.
    pub fn train(corpus: &[Vec<TokenId>], vocab: Vocab, order: usize, alpha: f64, max_len: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if order == 0 {
            return Err(Error::InvalidConfig("order must be at least 1".into()));
        }
        if order > max_len + 1 {
            return Err(Error::OrderTooLarge { order, max_len });
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha = {alpha}")));
        }
        let v = vocab.len();
        let mut counts: BTreeMap<Vec<TokenId>, ContextCounts> = BTreeMap::new();
        for seq in corpus {
            vocab.check_sequence(seq)?;
            let mut context = vec![BOS; order - 1];
            for &tok in seq.iter().chain(std::iter::once(&EOS)) {
                let entry = counts.entry(context.clone()).or_insert_with(|| ContextCounts {
                    counts: vec![0; v],
                    total: 0,
                });
                entry.counts[tok as usize] += 1;
                entry.total += 1;
                if order > 1 {
                    context.remove(0);
                    context.push(tok);
                }
            }
        }
        Ok(Self {
            order,
            vocab,
            alpha,
            max_len,
            counts,
        })
    }

    /// Trains on UTF-8 text, one sequence per line. Words are split on
    /// whitespace, or each line is split into characters when `chars` is set.
    /// The vocabulary is the sorted set of observed tokens.
    pub fn train_text(text: &str, order: usize, alpha: f64, max_len: usize, chars: bool) -> Result<Self> {
        let lines: Vec<Vec<String>> = text
            .lines()
            .map(|l| l.trim())
            .filter(|l| !l.is_empty())
            .map(|l| tokenize(l, chars))
            .collect();
        let words: BTreeSet<&str> = lines.iter().flatten().map(String::as_str).collect();
        for reserved in [BOS_TOKEN, EOS_TOKEN] {
            if words.contains(reserved) {
                return Err(Error::ReservedToken(reserved.into()));
            }
        }
        let vocab = Vocab::new(words.iter().copied())?;
        let corpus = lines
            .iter()
            .map(|l| l.iter().map(|w| vocab.id(w).unwrap_or(EOS)).collect())
            .collect::<Vec<_>>();
        Self::train(&corpus, vocab, order, alpha, max_len)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Number of distinct contexts observed in training.
    pub fn context_count(&self) -> usize {
        self.counts.len()
    }

    pub fn params(&self) -> NgramParams {
        let name = |t: TokenId| {
            if t == BOS {
                BOS_TOKEN.to_string()
            } else {
                self.vocab.token(t).unwrap_or_default().to_string()
            }
        };
        NgramParams {
            order: self.order,
            alpha: self.alpha,
            max_len: self.max_len,
            counts: self
                .counts
                .iter()
                .map(|(ctx, c)| ContextRecord {
                    context: ctx.iter().map(|&t| name(t)).collect(),
                    counts: c
                        .counts
                        .iter()
                        .enumerate()
                        .filter(|(_, &n)| n > 0)
                        .map(|(t, &n)| (name(t as TokenId), n))
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_params(vocab: Vocab, params: NgramParams) -> Result<Self> {
        if params.order == 0 || params.order > params.max_len + 1 {
            return Err(Error::OrderTooLarge {
                order: params.order,
                max_len: params.max_len,
            });
        }
        let id = |w: &str| -> Result<TokenId> {
            if w == BOS_TOKEN {
                Ok(BOS)
            } else {
                vocab.id(w).ok_or_else(|| Error::UnknownToken(w.into()))
            }
        };
        let mut counts = BTreeMap::new();
        for rec in params.counts {
            if rec.context.len() != params.order - 1 {
                return Err(Error::InvalidConfig("context length differs from order − 1".into()));
            }
            let ctx = rec.context.iter().map(|w| id(w)).collect::<Result<Vec<_>>>()?;
            let mut c = ContextCounts {
                counts: vec![0; vocab.len()],
                total: 0,
            };
            for (w, n) in rec.counts {
                let t = id(&w)?;
                if t == BOS {
                    return Err(Error::ReservedToken(w));
                }
                c.counts[t as usize] += n;
                c.total += n;
            }
            counts.insert(ctx, c);
        }
        Ok(Self {
            order: params.order,
            vocab,
            alpha: params.alpha,
            max_len: params.max_len,
            counts,
        })
    }
}

fn tokenize(line: &str, chars: bool) -> Vec<String> {
    if chars {
        line.chars()
            .map(|c| {
                if c.is_whitespace() {
                    SPACE_TOKEN.to_string()
                } else {
                    c.to_string()
                }
            })
            .collect()
    } else {
        line.split_whitespace().map(str::to_string).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramParams {
    pub order: usize,
    pub alpha: f64,
    pub max_len: usize,
    pub counts: Vec<ContextRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub context: Vec<String>,
    pub counts: Vec<(String, u64)>,
}

impl AutoregressiveModel for NgramModel {
    type State = NgramState;
    type Delta = TokenId;

    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn max_len(&self) -> usize {
        self.max_len
    }

    fn initial_state(&self) -> NgramState {
        NgramState {
            context: vec![BOS; self.order - 1],
            depth: 0,
        }
    }

    fn step(&self, mut state: NgramState, token: TokenId) -> NgramState {
        if !state.context.is_empty() {
            state.context.remove(0);
            state.context.push(token);
        }
        state.depth += 1;
        state
    }

    fn log_probs(&self, state: &NgramState) -> Vec<f64> {
        let v = self.vocab.len();
        if state.depth() >= self.max_len {
            let mut forced = vec![f64::NEG_INFINITY; v];
            forced[EOS as usize] = 0.0;
            return forced;
        }
        let uniform = vec![-(v as f64).ln(); v];
        let Some(c) = self.counts.get(&state.context) else {
            return uniform;
        };
        let denom = c.total as f64 + self.alpha * v as f64;
        if denom == 0.0 {
            return uniform;
        }
        let ln_denom = denom.ln();
        c.counts
            .iter()
            .map(|&n| (n as f64 + self.alpha).ln() - ln_denom)
            .collect()
    }

    fn delta(&self, state: &NgramState) -> TokenId {
        state.context.last().copied().unwrap_or(BOS)
    }

    fn rebuild(&self, base: Option<&NgramState>, deltas: &[&TokenId]) -> NgramState {
        let start = base.cloned().unwrap_or_else(|| self.initial_state());
        deltas.iter().fold(start, |s, &&t| self.step(s, t))
    }
}
