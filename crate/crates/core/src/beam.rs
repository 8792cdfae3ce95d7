//! Standard, length-constrained and attribute-conditional beam search.
//!
//! Every entry's stored score is its pure model log-likelihood S. Conditional
//! search ranks candidates by S + α·log P_clf(a | prefix, candidate), where
//! the predictor term is evaluated fresh at each step and never added into S:
//! the per-step attribute ratios of the conditional chain rule cancel, leaving
//! only the current prefix's term.
//!
//! Entries that emit EOS are frozen but stay on the beam and keep competing,
//! so with a wide enough beam the search reaches the exact (conditional) mode.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ranked_tokens, AutoregressiveModel, Hypothesis};
use crate::predictor::{bucket_of, AttributePredictor};
use crate::search::TIE_TOLERANCE;
use crate::vocab::{TokenId, EOS};

/// Candidate count per hypothesis used when deriving the conditional score.
pub const DEFAULT_TOP_K: usize = 500;
/// Candidate count used for the reported length-control experiments.
pub const EXPERIMENT_TOP_K: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConfig {
    pub beam_size: usize,
    /// Continuations proposed per live entry, taken by model probability.
    pub top_k: usize,
    /// Weight of the predictor term when ranking. Not applied at final selection.
    pub alpha: f64,
    /// Step cap; defaults to the model's maximum length. At the cap only EOS
    /// may be proposed.
    pub max_len: Option<usize>,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            beam_size: 5,
            top_k: DEFAULT_TOP_K,
            alpha: 1.0,
            max_len: None,
        }
    }
}

impl BeamConfig {
    pub fn new(beam_size: usize, top_k: usize, alpha: f64) -> Result<Self> {
        let cfg = Self {
            beam_size,
            top_k,
            alpha,
            max_len: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 || self.top_k == 0 {
            return Err(Error::InvalidConfig("beam size and top-k must be at least 1".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha = {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamEntry {
    pub hypothesis: Hypothesis,
    /// Predictor log-probability last used for ranking; for returned entries,
    /// log P_clf(a | complete output). Zero for unguided search.
    pub guidance: f64,
    pub frozen: bool,
}

impl BeamEntry {
    /// S plus the final guidance term (α excluded).
    pub fn final_score(&self) -> f64 {
        self.hypothesis.logprob + self.guidance
    }
}

/// The attribute value conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// A predictor class.
    Class(usize),
    /// Output length exactly L: EOS is masked before step L and forced at it,
    /// and the predictor is asked for the remaining-length class.
    Length(usize),
}

struct Guide<'p, M: AutoregressiveModel> {
    predictor: &'p dyn AttributePredictor<M>,
    target: Target,
    alpha: f64,
}

struct Slot<S> {
    entry: BeamEntry,
    state: Option<S>,
    rank: f64,
}

fn guidance_class(target: Target, depth: usize, candidate: TokenId) -> Option<usize> {
    match target {
        Target::Class(c) => Some(c),
        // EOS is only proposed at depth L, where the constraint holds.
        Target::Length(_) if candidate == EOS => None,
        Target::Length(len) => Some(bucket_of(len - depth - 1)),
    }
}

fn run<M: AutoregressiveModel>(
    model: &M,
    config: &BeamConfig,
    length: Option<usize>,
    guide: Option<Guide<'_, M>>,
) -> Result<Vec<BeamEntry>> {
    config.validate()?;
    let cap = config.max_len.unwrap_or(usize::MAX).min(model.max_len());
    if let Some(len) = length {
        if len > model.max_len() {
            return Err(Error::NoFeasibleSequence { length: len });
        }
    }
    let mut beam = vec![Slot {
        entry: BeamEntry {
            hypothesis: Hypothesis::empty(),
            guidance: 0.0,
            frozen: false,
        },
        state: Some(model.initial_state()),
        rank: 0.0,
    }];

    while beam.iter().any(|s| !s.entry.frozen) {
        let mut pool: Vec<Slot<M::State>> = Vec::new();
        for slot in beam {
            let Some(state) = slot.state else {
                pool.push(slot);
                continue;
            };
            let depth = slot.entry.hypothesis.len();
            let lps = model.log_probs(&state);
            let allowed = |t: TokenId| match length {
                Some(len) if depth < len => t != EOS,
                Some(_) => t == EOS,
                None => depth < cap || t == EOS,
            };
            let candidates: Vec<TokenId> = ranked_tokens(&lps)
                .into_iter()
                .filter(|&t| allowed(t))
                .take(config.top_k)
                .collect();
            for tok in candidates {
                let score = slot.entry.hypothesis.logprob + lps[tok as usize];
                let guidance = match &guide {
                    Some(g) => match guidance_class(g.target, depth, tok) {
                        Some(class) => g.predictor.class_log_probs(&slot.entry.hypothesis.tokens, &state, tok)[class],
                        None => 0.0,
                    },
                    None => 0.0,
                };
                let weighted = match &guide {
                    Some(g) if g.alpha != 0.0 => g.alpha * guidance,
                    _ => 0.0,
                };
                let rank = score + weighted;
                if rank == f64::NEG_INFINITY || rank.is_nan() {
                    continue;
                }
                let mut hypothesis = slot.entry.hypothesis.clone();
                hypothesis.logprob = score;
                let frozen = tok == EOS;
                let next_state = if frozen {
                    hypothesis.complete = true;
                    None
                } else {
                    hypothesis.tokens.push(tok);
                    Some(model.step(state.clone(), tok))
                };
                pool.push(Slot {
                    entry: BeamEntry {
                        hypothesis,
                        guidance,
                        frozen,
                    },
                    state: next_state,
                    rank,
                });
            }
        }
        sort_tied(
            &mut pool,
            |s| s.rank,
            |a, b| {
                a.entry
                    .hypothesis
                    .tokens
                    .cmp(&b.entry.hypothesis.tokens)
                    .then_with(|| b.entry.frozen.cmp(&a.entry.frozen))
            },
        );
        pool.truncate(config.beam_size);
        if pool.is_empty() {
            return Err(Error::NoFeasibleSequence {
                length: length.unwrap_or(0),
            });
        }
        beam = pool;
    }

    let mut out: Vec<BeamEntry> = beam.into_iter().map(|s| s.entry).collect();
    sort_tied(&mut out, BeamEntry::final_score, |a, b| {
        a.hypothesis.tokens.cmp(&b.hypothesis.tokens)
    });
    Ok(out)
}

/// Descending by score; runs within [`TIE_TOLERANCE`] of their head are
/// ordered by `tie`.
fn sort_tied<T>(items: &mut [T], score: impl Fn(&T) -> f64, tie: impl Fn(&T, &T) -> Ordering) {
    items.sort_by(|a, b| score(b).total_cmp(&score(a)).then_with(|| tie(a, b)));
    let mut start = 0;
    while start < items.len() {
        let head = score(&items[start]);
        let end = start
            + items[start..]
                .iter()
                .take_while(|x| score(x) >= head - TIE_TOLERANCE)
                .count();
        items[start..end].sort_by(&tie);
        start = end;
    }
}

/// Plain beam search ranked by S. EOS competes like any other token.
pub fn beam_search<M: AutoregressiveModel>(model: &M, config: &BeamConfig) -> Result<Vec<BeamEntry>> {
    run(model, config, None, None)
}

/// Beam search over outputs of exactly `length` tokens: EOS is masked (no
/// renormalization) before step `length` and forced at it.
pub fn length_constrained_beam<M: AutoregressiveModel>(
    model: &M,
    length: usize,
    config: &BeamConfig,
) -> Result<Vec<BeamEntry>> {
    run(model, config, Some(length), None)
}

/// Attribute-conditional beam search. Returned entries are ordered by
/// S + log P_clf(a | complete output).
pub fn conditional_beam<M, P>(model: &M, predictor: &P, target: Target, config: &BeamConfig) -> Result<Vec<BeamEntry>>
where
    M: AutoregressiveModel,
    P: AttributePredictor<M>,
{
    if let Target::Class(c) = target {
        predictor.check_class(c)?;
    }
    let length = match target {
        Target::Length(len) => Some(len),
        Target::Class(_) => None,
    };
    let guide = Guide {
        predictor: predictor as &dyn AttributePredictor<M>,
        target,
        alpha: config.alpha,
    };
    run(model, config, length, Some(guide))
}

/// Fractions of paired runs where method A scores higher, ties, or B scores higher.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Winrate {
    pub frac_a: f64,
    pub frac_tie: f64,
    pub frac_b: f64,
}

/// Compares scores index-wise; differences within 1e-12 (and −∞ against −∞)
/// are ties.
pub fn winrate_scores(a: &[f64], b: &[f64]) -> Result<Winrate> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidConfig("winrate over zero pairs".into()));
    }
    let (mut wa, mut wb) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        let tie = x == y || (x - y).abs() <= TIE_TOLERANCE;
        if !tie {
            if x > y {
                wa += 1;
            } else {
                wb += 1;
            }
        }
    }
    let n = a.len();
    let ties = n - wa - wb;
    Ok(Winrate {
        frac_a: wa as f64 / n as f64,
        frac_tie: ties as f64 / n as f64,
        frac_b: wb as f64 / n as f64,
    })
}

pub fn winrate(a: &[Hypothesis], b: &[Hypothesis]) -> Result<Winrate> {
    let scores = |h: &[Hypothesis]| h.iter().map(|x| x.logprob).collect::<Vec<_>>();
    winrate_scores(&scores(a), &scores(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{ExplicitDistribution, TrieModel};
    use crate::vocab::Vocab;

    fn model(entries: &[(&str, u64)]) -> TrieModel {
        let vocab = Vocab::new(["a", "b", "c"]).unwrap();
        let w = entries.iter().map(|(s, n)| (vocab.encode(s).unwrap(), *n)).collect();
        TrieModel::new(ExplicitDistribution::from_weights(vocab, w).unwrap())
    }

    fn hyp(lp: f64) -> Hypothesis {
        Hypothesis {
            tokens: vec![],
            logprob: lp,
            complete: true,
        }
    }

    #[test]
    fn width_one_takes_empty_when_eos_leads() {
        let m = model(&[("", 5), ("a", 3), ("b", 2)]);
        let cfg = BeamConfig::new(1, 10, 1.0).unwrap();
        let out = beam_search(&m, &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].hypothesis.tokens.is_empty());
        assert!((out[0].hypothesis.logprob - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn greedy_completion() {
        // greedy: a (0.7), then b (4/7), then EOS
        let m = model(&[("a b", 4), ("a c", 3), ("b", 3)]);
        let out = beam_search(&m, &BeamConfig::new(1, 10, 1.0).unwrap()).unwrap();
        assert_eq!(out[0].hypothesis.tokens, vec![1, 2]);
        assert!(out[0].hypothesis.complete);
    }

    #[test]
    fn length_zero_and_infeasible() {
        let m = model(&[("", 1), ("a b c", 1)]);
        let cfg = BeamConfig::new(3, 10, 1.0).unwrap();
        let zero = length_constrained_beam(&m, 0, &cfg).unwrap();
        assert!(zero[0].hypothesis.tokens.is_empty());
        assert!((zero[0].hypothesis.logprob - 0.5f64.ln()).abs() < 1e-15);
        let three = length_constrained_beam(&m, 3, &cfg).unwrap();
        assert_eq!(three[0].hypothesis.tokens, vec![1, 2, 3]);
        assert_eq!(
            length_constrained_beam(&m, 2, &cfg),
            Err(Error::NoFeasibleSequence { length: 2 })
        );
        assert_eq!(
            length_constrained_beam(&m, 7, &cfg),
            Err(Error::NoFeasibleSequence { length: 7 })
        );
    }

    #[test]
    fn config_validation() {
        assert!(BeamConfig::new(0, 1, 1.0).is_err());
        assert!(BeamConfig::new(1, 0, 1.0).is_err());
        assert!(BeamConfig::new(1, 1, -1.0).is_err());
        assert!(BeamConfig::new(1, 1, f64::NAN).is_err());
    }

    #[test]
    fn winrate_cases() {
        let a = [hyp(-1.0), hyp(-2.0)];
        let b = [hyp(-2.0), hyp(-1.0)];
        let w = winrate(&a, &b).unwrap();
        assert_eq!((w.frac_a, w.frac_tie, w.frac_b), (0.5, 0.0, 0.5));
        let same = winrate(&a, &a).unwrap();
        assert_eq!((same.frac_a, same.frac_tie, same.frac_b), (0.0, 1.0, 0.0));
        let inf = winrate_scores(&[f64::NEG_INFINITY], &[f64::NEG_INFINITY]).unwrap();
        assert_eq!(inf.frac_tie, 1.0);
        assert_eq!(winrate(&a, &b[..1]), Err(Error::LengthMismatch { left: 2, right: 1 }));
    }
}
