//! Exact mode search by depth-first branch-and-bound.
//!
//! Extending a prefix never raises its probability, so any partial hypothesis
//! scoring below the best complete hypothesis found so far can be discarded.
//! Every expanded node also yields a complete candidate for free: its EOS
//! continuation. Children are visited in descending conditional probability
//! so strong incumbents appear early.

mod dfs;
mod report;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ranked_tokens, AutoregressiveModel, Hypothesis};
use crate::vocab::{TokenId, EOS};

pub use report::{empty_mode_report, EmptyModeInput, ReportRow};

/// Log-probabilities within this distance are ties.
pub const TIE_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_MAX_NODES: usize = 1_000_000;
pub const DEFAULT_TIE_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    pub max_nodes: usize,
    pub max_depth: usize,
}

impl SearchBudget {
    pub fn new(max_nodes: usize, max_depth: usize) -> Result<Self> {
        if max_nodes == 0 || max_depth == 0 {
            return Err(Error::InvalidConfig("search budget limits must be at least 1".into()));
        }
        Ok(Self { max_nodes, max_depth })
    }
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            max_nodes: DEFAULT_MAX_NODES,
            max_depth: usize::MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    pub budget: SearchBudget,
    /// Disable to search the whole positive-mass tree.
    pub prune: bool,
    /// Keep one delta per node and rebuild full states on demand.
    pub cache: bool,
    /// Maximum number of tied argmax hypotheses retained.
    pub tie_cap: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            budget: SearchBudget::default(),
            prune: true,
            cache: true,
            tie_cap: DEFAULT_TIE_CAP,
        }
    }
}

impl SearchOptions {
    pub fn with_budget(budget: SearchBudget) -> Self {
        Self {
            budget,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    pub nodes_expanded: u64,
    pub prunes: u64,
    pub completes_considered: u64,
    pub full_state_rebuilds: u64,
    /// Peak number of deltas plus full states held on the active path.
    pub peak_cached_states: usize,
    pub peak_cached_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeResult {
    /// Every maximal complete hypothesis (up to the tie cap), ordered by token ids.
    pub argmax: Vec<Hypothesis>,
    /// True iff the whole space was explored or soundly pruned.
    pub exhausted: bool,
    pub stats: SearchStats,
}

impl ModeResult {
    pub fn best(&self) -> Option<&Hypothesis> {
        self.argmax.first()
    }

    /// Log-probability of the mode, −∞ if nothing was found.
    pub fn logprob(&self) -> f64 {
        self.best().map_or(f64::NEG_INFINITY, |h| h.logprob)
    }

    pub fn is_empty_mode(&self) -> bool {
        self.best().is_some_and(Hypothesis::is_empty)
    }

    /// `Err(BudgetExceeded)` unless the search was exhaustive.
    pub fn exact(self) -> Result<Self> {
        if self.exhausted {
            Ok(self)
        } else {
            Err(Error::BudgetExceeded)
        }
    }
}

/// Exact mode with default options. A non-exhausted result is the best found
/// within the budget.
pub fn global_mode<M: AutoregressiveModel>(model: &M, budget: SearchBudget) -> ModeResult {
    global_mode_with(model, &SearchOptions::with_budget(budget))
}

pub fn global_mode_with<M: AutoregressiveModel>(model: &M, opts: &SearchOptions) -> ModeResult {
    dfs::Dfs::new(model, *opts, None).run()
}

/// Exact mode among sequences of exactly `length` tokens.
pub fn length_conditional_mode<M: AutoregressiveModel>(
    model: &M,
    length: usize,
    budget: SearchBudget,
) -> Result<ModeResult> {
    length_conditional_mode_with(model, length, &SearchOptions::with_budget(budget))
}

pub fn length_conditional_mode_with<M: AutoregressiveModel>(
    model: &M,
    length: usize,
    opts: &SearchOptions,
) -> Result<ModeResult> {
    if length > model.max_len() {
        return Err(Error::NoFeasibleSequence { length });
    }
    let result = dfs::Dfs::new(model, *opts, Some(length)).run();
    if result.exhausted && result.argmax.is_empty() {
        return Err(Error::NoFeasibleSequence { length });
    }
    Ok(result)
}

/// Sorts by descending log-probability; runs of ties (within
/// [`TIE_TOLERANCE`] of the run's head) are ordered by token ids.
pub fn sort_ranked(hyps: &mut [Hypothesis]) {
    hyps.sort_by(|a, b| b.logprob.total_cmp(&a.logprob).then_with(|| a.tokens.cmp(&b.tokens)));
    let mut start = 0;
    while start < hyps.len() {
        let head = hyps[start].logprob;
        let end = start
            + hyps[start..]
                .iter()
                .take_while(|h| h.logprob >= head - TIE_TOLERANCE)
                .count();
        hyps[start..end].sort_by(|a, b| a.tokens.cmp(&b.tokens));
        start = end;
    }
}

/// Every positive-mass complete sequence of at most `max_len` tokens, ranked
/// by [`sort_ranked`]. Fails once more than `limit` prefixes would be visited.
pub fn enumerate<M: AutoregressiveModel>(model: &M, max_len: usize, limit: usize) -> Result<Vec<Hypothesis>> {
    let mut out = Vec::new();
    let mut visited = 0usize;
    let mut stack: Vec<(M::State, Vec<TokenId>, f64)> = vec![(model.initial_state(), Vec::new(), 0.0)];
    while let Some((state, tokens, lp)) = stack.pop() {
        visited += 1;
        if visited > limit {
            return Err(Error::EnumerationLimit { limit });
        }
        let lps = model.log_probs(&state);
        if lps[EOS as usize] > f64::NEG_INFINITY {
            out.push(Hypothesis {
                tokens: tokens.clone(),
                logprob: lp + lps[EOS as usize],
                complete: true,
            });
        }
        if tokens.len() >= max_len {
            continue;
        }
        for tok in ranked_tokens(&lps).into_iter().filter(|&t| t != EOS) {
            let mut next = tokens.clone();
            next.push(tok);
            stack.push((model.step(state.clone(), tok), next, lp + lps[tok as usize]));
        }
    }
    sort_ranked(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{DepthModel, ExplicitDistribution, TrieModel};
    use crate::vocab::Vocab;

    fn trie(entries: &[(&str, u64)]) -> TrieModel {
        let vocab = Vocab::new(["a", "b", "c"]).unwrap();
        let weights = entries.iter().map(|(s, w)| (vocab.encode(s).unwrap(), *w)).collect();
        TrieModel::new(ExplicitDistribution::from_weights(vocab, weights).unwrap())
    }

    #[test]
    fn empty_mode_from_first_factor() {
        let m = trie(&[("", 6), ("a", 2), ("b", 2)]);
        let r = global_mode(&m, SearchBudget::default());
        assert!(r.exhausted);
        assert!(r.is_empty_mode());
        assert!((r.logprob() - 0.6f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn ties_are_all_reported_in_token_order() {
        let m = trie(&[("b", 1), ("a", 1), ("c a", 1)]);
        let r = global_mode(&m, SearchBudget::default());
        let got: Vec<_> = r.argmax.iter().map(|h| h.tokens.clone()).collect();
        assert_eq!(got, vec![vec![1], vec![2], vec![3, 1]]);
        let capped = global_mode_with(
            &m,
            &SearchOptions {
                tie_cap: 2,
                ..SearchOptions::default()
            },
        );
        assert_eq!(capped.argmax.len(), 2);
        assert_eq!(capped.argmax[0].tokens, vec![1]);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let m = DepthModel::binary_tree(12).unwrap();
        let opts = SearchOptions {
            budget: SearchBudget::new(50, usize::MAX).unwrap(),
            prune: false,
            ..SearchOptions::default()
        };
        let r = global_mode_with(&m, &opts);
        assert!(!r.exhausted);
        assert_eq!(r.stats.nodes_expanded, 50);
        assert_eq!(r.exact(), Err(Error::BudgetExceeded));
        let shallow = global_mode(&m, SearchBudget::new(1000, 3).unwrap());
        assert!(!shallow.exhausted);
        assert!(SearchBudget::new(0, 1).is_err());
    }

    #[test]
    fn length_conditional_basics() {
        let m = trie(&[("", 5), ("a b c", 1), ("a", 4)]);
        let r0 = length_conditional_mode(&m, 0, SearchBudget::default()).unwrap();
        assert!(r0.is_empty_mode());
        assert!((r0.logprob() - 0.5f64.ln()).abs() < 1e-15);
        let r3 = length_conditional_mode(&m, 3, SearchBudget::default()).unwrap();
        assert_eq!(r3.best().unwrap().tokens, vec![1, 2, 3]);
        assert!((r3.logprob() - 0.1f64.ln()).abs() < 1e-12);
        assert_eq!(
            length_conditional_mode(&m, 2, SearchBudget::default()),
            Err(Error::NoFeasibleSequence { length: 2 })
        );
        assert_eq!(
            length_conditional_mode(&m, 9, SearchBudget::default()),
            Err(Error::NoFeasibleSequence { length: 9 })
        );
    }

    #[test]
    fn enumerate_lists_support_in_rank_order() {
        let m = trie(&[("a", 1), ("a b", 1)]);
        let all = enumerate(&m, 8, 1000).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].tokens, vec![1]);
        assert_eq!(all[1].tokens, vec![1, 2]);
        assert!((all[0].logprob - all[1].logprob).abs() < 1e-15);
        assert_eq!(enumerate(&m, 8, 1), Err(Error::EnumerationLimit { limit: 1 }));
    }

    #[test]
    fn sort_ranked_groups_near_ties() {
        let h = |t: Vec<TokenId>, lp: f64| Hypothesis {
            tokens: t,
            logprob: lp,
            complete: true,
        };
        let mut v = vec![h(vec![2], -1.0), h(vec![1], -1.0 - 1e-14), h(vec![3], -0.5)];
        sort_ranked(&mut v);
        let order: Vec<_> = v.iter().map(|x| x.tokens[0]).collect();
        assert_eq!(order, vec![3, 1, 2]);
    }
}
